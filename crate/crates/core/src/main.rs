fn main() {
    std::process::exit(dcsite::cli::run(std::env::args_os()));
}

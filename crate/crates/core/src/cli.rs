//! `dcsite` command line: `loadflow`, `optimize` and `scenario`.
//!
//! Exit codes: 0 success, 1 configuration/input error, 2 load flow did not
//! converge, 3 scenario loop exhausted `s_max` without a bus decision.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, BUILTIN_IEEE33};
use crate::ga::run_ga;
use crate::network::BusId;
use crate::objective::{Problem, WeightVector};
use crate::powerflow::solve;
use crate::report::{self, ScenarioRow};
use crate::scenario::{run_multi_scenario, GaOptimizer, MultiScenarioRun, ScenarioResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dcsite",
    version,
    about = "Data-center siting and DG sizing on radial feeders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the feeder load flow, optionally with a DG injection.
    Loadflow {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, requires = "dg_kw")]
        dg_bus: Option<BusId>,
        #[arg(long, requires = "dg_bus")]
        dg_kw: Option<f64>,
    },
    /// Run one GA under a single weight vector.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated w1,w2,w3 (losses, VDI, cost); rescaled to sum to one.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        weights: String,
    },
    /// Run the multi-scenario loop until the bus decision converges.
    Scenario {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        s_max: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run configuration file (TOML key-value pairs).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use an embedded test feeder.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    #[arg(long, value_name = "CSV")]
    buses: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    branches: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    economics: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            network: self.builtin.clone(),
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            economics: self.economics.clone(),
            seed: self.seed,
            out: self.out.clone(),
            ..Default::default()
        };
        let mut merged = file;
        // explicit files on the command line replace a built-in named in the config, and vice versa
        if flags.buses.is_some() || flags.branches.is_some() {
            merged.network = None;
        }
        if flags.network.is_some() {
            merged.buses = None;
            merged.branches = None;
        }
        if let Some(name) = &flags.network {
            if name != BUILTIN_IEEE33 {
                bail!("unknown built-in network `{name}` (available: {BUILTIN_IEEE33})");
            }
        }
        Ok(merged.overlay(flags))
    }
}

/// Parses `args` (program name first) and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Loadflow {
            common,
            dg_bus,
            dg_kw,
        } => {
            let cfg = common.resolve()?;
            cmd_loadflow(&cfg, dg_bus.zip(dg_kw))
        }
        Command::Optimize { common, weights } => {
            let cfg = common.resolve()?;
            cmd_optimize(&cfg, &parse_weights(&weights)?)
        }
        Command::Scenario { common, s_max } => {
            let mut cfg = common.resolve()?;
            cfg.s_max = s_max.or(cfg.s_max);
            cmd_scenario(&cfg)
        }
    }
}

pub fn parse_weights(text: &str) -> anyhow::Result<WeightVector> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid weight `{s}`"))
        })
        .collect::<anyhow::Result<_>>()?;
    let [w1, w2, w3] = parts[..] else {
        bail!("expected three comma-separated weights, got {}", parts.len());
    };
    Ok(WeightVector::new(w1, w2, w3)?)
}

fn out_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn cmd_loadflow(cfg: &RunConfig, dg: Option<(BusId, f64)>) -> anyhow::Result<i32> {
    let net = cfg.network_model()?;
    let limits = cfg.limits()?;
    let settings = cfg.solver_settings()?;
    let case = match dg {
        Some((bus, kw)) => net.apply_dg(bus, kw)?,
        None => net.clone(),
    };
    let sol = solve(&case, &settings)?;
    let dir = out_dir(cfg)?;
    let rep = report::LoadflowReport::new(&case, &sol, &limits, dg);
    report::write_json(&dir.join("loadflow.json"), &rep)?;
    report::write_csv(&dir.join("voltage_profile.csv"), &report::voltage_profile(&sol))?;

    println!(
        "loss {:.2} kW  VDI {:.4}  min V {:.4} p.u. at bus {}  ({} iterations)",
        rep.total_loss_kw, rep.vdi, rep.min_voltage.v_pu, rep.min_voltage.bus, rep.iterations
    );
    if !sol.converged {
        eprintln!(
            "load flow did not converge after {} iterations (mismatch {:e})",
            sol.iterations, sol.max_mismatch
        );
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

pub fn cmd_optimize(cfg: &RunConfig, weights: &WeightVector) -> anyhow::Result<i32> {
    let problem = cfg.problem()?;
    let ga = cfg.ga_config()?;
    let run = run_ga(&ga, &problem, weights)?;
    let b = &run.best_breakdown;
    let result = ScenarioResult {
        label: "optimize".into(),
        weights: *weights,
        bus: run.best.bus,
        p_dg: run.best.p_dg,
        cost: b.cost,
        p_loss: b.metrics.p_loss,
        vdi: b.metrics.vdi,
        min_v: b.metrics.min_v,
        objective: b.f,
        penalty: b.penalty,
        balanced_f: problem.evaluate(&run.best, &WeightVector::balanced())?.f,
    };
    let dir = out_dir(cfg)?;
    let rep = report::OptimizeReport {
        seed: ga.seed,
        evaluations: run.evaluations,
        result,
        breakdown: b.into(),
    };
    report::write_json(&dir.join("scenario_result.json"), &rep)?;
    report::write_csv(
        &dir.join("ga_convergence.csv"),
        &report::convergence(&run.history),
    )?;
    let sol = problem.load_flow(&run.best)?;
    report::write_csv(&dir.join("voltage_profile.csv"), &report::voltage_profile(&sol))?;

    let [w1, w2, w3] = weights.as_array();
    println!("weights [{w1:.4}, {w2:.4}, {w3:.4}]  seed {}", ga.seed);
    print_row(&ScenarioRow::scenario(&rep.result));
    Ok(EXIT_OK)
}

pub fn cmd_scenario(cfg: &RunConfig) -> anyhow::Result<i32> {
    let problem = cfg.problem()?;
    let ga = cfg.ga_config()?;
    let s_max = cfg.s_max()?;
    let master_seed = cfg.seed();
    let run = run_multi_scenario(&mut GaOptimizer::new(&problem, ga), s_max, master_seed)?;
    let dir = out_dir(cfg)?;
    write_scenario_reports(&dir, &problem, &run, master_seed)?;

    let base_min_v = base_min_voltage(&problem)?;
    for row in report::scenario_table(&run, problem.baselines(), base_min_v) {
        print_row(&row);
    }
    let d = &run.final_design;
    if !d.converged {
        eprintln!("bus decision did not converge within {s_max} scenarios");
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn base_min_voltage(problem: &Problem) -> anyhow::Result<f64> {
    Ok(solve(problem.network(), problem.settings())?.min_voltage().1)
}

pub fn write_scenario_reports(
    dir: &Path,
    problem: &Problem,
    run: &MultiScenarioRun,
    master_seed: u64,
) -> anyhow::Result<()> {
    let rows = report::scenario_table(run, problem.baselines(), base_min_voltage(problem)?);
    report::write_csv(&dir.join("scenarios.csv"), &rows)?;
    report::write_json(
        &dir.join("scenarios.json"),
        &report::ScenariosReport {
            master_seed,
            converged: run.final_design.converged,
            scenarios_run: run.final_design.scenarios_run,
            rows,
            results: run.results.clone(),
        },
    )?;
    report::write_json(
        &dir.join("final_design.json"),
        &report::FinalDesignReport::new(&run.final_design, problem.baselines()),
    )?;
    for (result, history) in run.results.iter().zip(&run.histories) {
        let slug = report::slug(&result.label);
        report::write_csv(
            &dir.join(format!("convergence_{slug}.csv")),
            &report::convergence(history),
        )?;
        let sol = problem.load_flow(&crate::CandidateSolution {
            bus: result.bus,
            p_dg: result.p_dg,
        })?;
        report::write_csv(
            &dir.join(format!("voltage_{slug}.csv")),
            &report::voltage_profile(&sol),
        )?;
    }
    let d = &run.final_design;
    let sol = problem.load_flow(&crate::CandidateSolution {
        bus: d.bus,
        p_dg: d.p_dg,
    })?;
    report::write_csv(&dir.join("voltage_final.csv"), &report::voltage_profile(&sol))?;
    Ok(())
}

fn print_row(r: &ScenarioRow) {
    let bus = r.bus.map_or_else(|| "-".to_string(), |b| b.to_string());
    println!(
        "{:<12} bus {:>3}  DG {:>8.1} kW  invest {:>10} USD  loss {:>7.2} kW  VDI {:.4}  min V {:.4}",
        r.label, bus, r.dg_kw, r.investment_usd, r.loss_kw, r.vdi, r.min_v
    );
}

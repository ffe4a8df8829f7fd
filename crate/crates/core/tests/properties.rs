use proptest::prelude::*;

use dcsite::economics::EconomicData;
use dcsite::ga::{run_ga, GaConfig};
use dcsite::metrics::vdi;
use dcsite::network::{BaseQuantities, Branch, Bus};
use dcsite::objective::WeightVector;
use dcsite::powerflow::{solve, SolverSettings};
use dcsite::{ieee33, NetworkModel, Problem};

fn problem() -> Problem {
    dcsite::config::RunConfig::default().problem().unwrap()
}

/// Radial feeder where bus `k` hangs off `parents[k - 2]`, which is below `k`.
fn feeder() -> impl Strategy<Value = NetworkModel> {
    (2usize..12).prop_flat_map(|n| {
        let parents: Vec<_> = (2..=n as u32).map(|k| 1..k).collect();
        let loads = prop::collection::vec((0.0..500.0f64, 0.0..300.0f64), n - 1);
        let imp = prop::collection::vec((0.01..1.0f64, 0.01..1.0f64), n - 1);
        (parents, loads, imp).prop_map(move |(parents, loads, imp)| {
            let mut buses = vec![Bus {
                id: 1,
                p_load: 0.0,
                q_load: 0.0,
            }];
            let mut branches = Vec::new();
            for (i, ((p, q), (r, x))) in loads.into_iter().zip(imp).enumerate() {
                let id = i as u32 + 2;
                buses.push(Bus {
                    id,
                    p_load: p,
                    q_load: q,
                });
                branches.push(Branch {
                    from_bus: parents[i],
                    to_bus: id,
                    r,
                    x,
                });
            }
            NetworkModel::new(
                buses,
                branches,
                BaseQuantities {
                    base_kv: 12.66,
                    base_mva: 10.0,
                },
                1,
            )
            .unwrap()
        })
    })
}

fn weights() -> impl Strategy<Value = WeightVector> {
    (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(a, b, c)| WeightVector::new(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dg_injections_add_up(bus in 2u32..=33, p1 in 0.0..2000.0f64, p2 in 0.0..2000.0f64) {
        let net = ieee33::builtin();
        let twice = net.apply_dg(bus, p1).unwrap().apply_dg(bus, p2).unwrap();
        let once = net.apply_dg(bus, p1 + p2).unwrap();
        let (a, b) = (twice.bus(bus).unwrap(), once.bus(bus).unwrap());
        prop_assert!((a.p_load - b.p_load).abs() < 1e-9);
        prop_assert_eq!(a.q_load, b.q_load);
        prop_assert_eq!(twice.total_load().1, net.total_load().1);
    }

    #[test]
    fn network_csv_round_trip(net in feeder()) {
        let dir = tempfile::tempdir().unwrap();
        net.write_csv(dir.path()).unwrap();
        let back = NetworkModel::load_csv(
            &dir.path().join("buses.csv"),
            &dir.path().join("branches.csv"),
            net.base(),
            net.slack_bus(),
        ).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn slack_supplies_load_plus_losses(bus in 2u32..=33, p_dg in 0.0..3609.0f64) {
        let net = ieee33::builtin().apply_dg(bus, p_dg).unwrap();
        let sol = solve(&net, &SolverSettings::default()).unwrap();
        prop_assert!(sol.converged);
        let (p, q) = net.total_load();
        let base = net.base();
        let q_loss: f64 = net
            .branches()
            .iter()
            .zip(&sol.branch_currents)
            .map(|(br, i)| i.norm_sqr() * br.x / base.z_base() * base.kw_base())
            .sum();
        prop_assert!((sol.slack_injection.re - (p + sol.total_loss)).abs() < 0.01, "{} vs {}", sol.slack_injection.re, p + sol.total_loss);
        prop_assert!((sol.slack_injection.im - (q + q_loss)).abs() < 0.01);
        let branch_sum: f64 = sol.branch_losses.iter().sum();
        prop_assert!((branch_sum - sol.total_loss).abs() < 1e-9);
    }

    #[test]
    fn results_do_not_depend_on_input_order(net in feeder(), rot in 0usize..16) {
        let mut buses = net.buses().to_vec();
        let mut branches = net.branches().to_vec();
        buses.reverse();
        let k = rot % branches.len();
        branches.rotate_left(k);
        let shuffled = NetworkModel::new(buses, branches, net.base(), net.slack_bus()).unwrap();
        let a = solve(&net, &SolverSettings::default()).unwrap();
        let b = solve(&shuffled, &SolverSettings::default()).unwrap();
        prop_assert!((vdi(&a) - vdi(&b)).abs() < 1e-12);
        prop_assert!((a.total_loss - b.total_loss).abs() < 1e-9);
        for id in net.buses().iter().map(|b| b.id) {
            prop_assert!((a.voltage(id).unwrap() - b.voltage(id).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn weights_always_sum_to_one(w in weights()) {
        let s: f64 = w.as_array().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(w.as_array().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn economics_csv_round_trip(costs in prop::collection::btree_map(2u32..200, 1.0..1e6f64, 1..40)) {
        let econ = EconomicData::new(costs, 1200.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("econ.csv");
        econ.write_csv(&path).unwrap();
        prop_assert_eq!(EconomicData::load_csv(&path, 1200.0).unwrap(), econ);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ga_returns_feasible_monotone_results(
        w in weights(),
        seed in any::<u64>(),
        pop in 4usize..24,
        iters in 1usize..12,
        mutation in 0.0..=1.0f64,
        crossover in 0.0..=1.0f64,
    ) {
        let p = problem();
        let cfg = GaConfig {
            population_size: pop,
            iterations: iters,
            mutation_rate: mutation,
            crossover_rate: crossover,
            seed,
            ..GaConfig::default()
        };
        let run = run_ga(&cfg, &p, &w).unwrap();
        let c = run.best;
        prop_assert!(p.candidates().contains(&c.bus));
        prop_assert!(p.bounds().contains(c.p_dg));
        prop_assert_eq!(run.history.len(), iters);
        prop_assert!(run.history.windows(2).all(|h| h[1] <= h[0]));
        prop_assert_eq!(*run.history.last().unwrap(), run.best_breakdown.f);
        prop_assert_eq!(run.evaluations, pop + iters * (pop - cfg.elite_count));
        prop_assert_eq!(p.evaluate(&c, &w).unwrap(), run.best_breakdown);
        prop_assert_eq!(run_ga(&cfg, &p, &w).unwrap().best, c);
    }
}

//! Multi-scenario weighting with adaptive convergence on the siting decision.
//!
//! Three fixed stakeholder weightings run first (loss, voltage quality,
//! techno-economic balance), then near-uniform perturbed weightings. After
//! every scenario the selected buses are checked: as soon as the modal bus has
//! been chosen twice it becomes the decision and the DG size is the mean over
//! the scenarios that chose it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{run_ga, GaConfig};
use crate::network::BusId;
use crate::objective::{CandidateSolution, ObjectiveBreakdown, Problem, WeightVector};

pub const DEFAULT_S_MAX: usize = 10;
/// Half-width of the per-component perturbation around the uniform weighting.
pub const WEIGHT_PERTURBATION: f64 = 0.05;
const UNIFORM_WEIGHT: f64 = 0.33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub weights: WeightVector,
    pub bus: BusId,
    /// kW
    pub p_dg: f64,
    /// USD
    pub cost: f64,
    /// kW
    pub p_loss: f64,
    pub vdi: f64,
    pub min_v: f64,
    /// Objective under the scenario's own weights.
    pub objective: f64,
    pub penalty: f64,
    /// Objective under uniform weights; used to break ties between equally frequent buses.
    pub balanced_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalDesign {
    pub bus: BusId,
    pub p_dg: f64,
    pub contributing: Vec<ScenarioResult>,
    /// Re-evaluation of (bus, p_dg) under uniform weights.
    pub breakdown: ObjectiveBreakdown,
    pub converged: bool,
    pub scenarios_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiScenarioRun {
    pub results: Vec<ScenarioResult>,
    /// Per-scenario optimizer convergence history, parallel to `results`.
    pub histories: Vec<Vec<f64>>,
    pub final_design: FinalDesign,
}

/// What a scenario's optimizer returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPick {
    pub candidate: CandidateSolution,
    pub history: Vec<f64>,
}

/// The per-scenario search plus the objective used to score its picks.
pub trait ScenarioOptimizer {
    fn optimize(&mut self, weights: &WeightVector, seed: u64) -> Result<ScenarioPick>;

    fn evaluate(&self, cand: &CandidateSolution, weights: &WeightVector) -> Result<ObjectiveBreakdown>;
}

/// GA-backed optimizer; each scenario runs `template` with the scenario's seed.
pub struct GaOptimizer<'a> {
    problem: &'a Problem,
    template: GaConfig,
}

impl<'a> GaOptimizer<'a> {
    pub fn new(problem: &'a Problem, template: GaConfig) -> Self {
        Self { problem, template }
    }
}

impl ScenarioOptimizer for GaOptimizer<'_> {
    fn optimize(&mut self, weights: &WeightVector, seed: u64) -> Result<ScenarioPick> {
        let run = run_ga(&self.template.with_seed(seed), self.problem, weights)?;
        Ok(ScenarioPick {
            candidate: run.best,
            history: run.history,
        })
    }

    fn evaluate(&self, cand: &CandidateSolution, weights: &WeightVector) -> Result<ObjectiveBreakdown> {
        self.problem.evaluate(cand, weights)
    }
}

/// Loss priority, voltage priority, techno-economic balance.
pub fn base_scenarios() -> [(&'static str, WeightVector); 3] {
    let w = |a, b, c| WeightVector::new(a, b, c).expect("fixed weights are valid");
    [
        ("A", w(0.80, 0.10, 0.10)),
        ("B", w(0.10, 0.80, 0.10)),
        ("C", w(0.40, 0.20, 0.40)),
    ]
}

/// `normalize([0.33, 0.33, 0.33] + U(-0.05, 0.05)³)`, clamped at zero.
pub fn adaptive_weights(rng: &mut ChaCha8Rng) -> WeightVector {
    let mut w = [0.0; 3];
    for x in &mut w {
        *x = (UNIFORM_WEIGHT + rng.random_range(-WEIGHT_PERTURBATION..=WEIGHT_PERTURBATION)).max(0.0);
    }
    let sum: f64 = w.iter().sum();
    WeightVector::new(w[0] / sum, w[1] / sum, w[2] / sum).expect("perturbed weights are positive")
}

/// Seed of scenario `index` (1-based) under `master`; index 0 drives the adaptive weights.
///
/// SplitMix64 finalizer over `master ^ (index · golden ratio)`, so any single
/// scenario can be replayed from the master seed alone.
pub fn scenario_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The modal bus and its count; equal counts go to the lowest mean `balanced_f`, then lowest id.
pub fn modal_bus(results: &[ScenarioResult]) -> Option<(BusId, usize)> {
    let mut tally: BTreeMap<BusId, (usize, f64)> = BTreeMap::new();
    for r in results {
        let e = tally.entry(r.bus).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.balanced_f;
    }
    tally
        .into_iter()
        .map(|(bus, (count, total))| (bus, count, total / count as f64))
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .map(|(bus, count, _)| (bus, count))
}

/// Bus decision once the modal bus has been picked at least twice.
pub fn check_convergence(results: &[ScenarioResult]) -> Option<BusId> {
    modal_bus(results).filter(|&(_, n)| n >= 2).map(|(bus, _)| bus)
}

pub fn run_multi_scenario<O: ScenarioOptimizer>(
    optimizer: &mut O,
    s_max: usize,
    master_seed: u64,
) -> Result<MultiScenarioRun> {
    if s_max < 3 {
        return Err(Error::Config(format!("s_max must be >= 3, got {s_max}")));
    }
    let base = base_scenarios();
    let balanced = WeightVector::balanced();
    let mut weight_rng = ChaCha8Rng::seed_from_u64(scenario_seed(master_seed, 0));
    let mut results: Vec<ScenarioResult> = Vec::new();
    let mut histories = Vec::new();
    let mut decision = None;

    for s in 1..=s_max {
        let (label, weights) = match base.get(s - 1) {
            Some(&(label, w)) => (label.to_string(), w),
            None => (format!("Adaptive-{s}"), adaptive_weights(&mut weight_rng)),
        };
        let pick = optimizer.optimize(&weights, scenario_seed(master_seed, s as u64))?;
        let own = optimizer.evaluate(&pick.candidate, &weights)?;
        let uniform = optimizer.evaluate(&pick.candidate, &balanced)?;
        results.push(ScenarioResult {
            label,
            weights,
            bus: pick.candidate.bus,
            p_dg: pick.candidate.p_dg,
            cost: own.cost,
            p_loss: own.metrics.p_loss,
            vdi: own.metrics.vdi,
            min_v: own.metrics.min_v,
            objective: own.f,
            penalty: own.penalty,
            balanced_f: uniform.f,
        });
        histories.push(pick.history);

        decision = check_convergence(&results);
        if decision.is_some() {
            break;
        }
    }

    let converged = decision.is_some();
    let bus = match decision {
        Some(bus) => bus,
        None => modal_bus(&results).expect("at least three scenarios ran").0,
    };
    let contributing: Vec<ScenarioResult> = results.iter().filter(|r| r.bus == bus).cloned().collect();
    let p_dg = contributing.iter().map(|r| r.p_dg).sum::<f64>() / contributing.len() as f64;
    let breakdown = optimizer.evaluate(&CandidateSolution { bus, p_dg }, &balanced)?;

    Ok(MultiScenarioRun {
        final_design: FinalDesign {
            bus,
            p_dg,
            contributing,
            breakdown,
            converged,
            scenarios_run: results.len(),
        },
        results,
        histories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(bus: BusId, balanced_f: f64) -> ScenarioResult {
        ScenarioResult {
            label: String::new(),
            weights: WeightVector::balanced(),
            bus,
            p_dg: 0.0,
            cost: 0.0,
            p_loss: 0.0,
            vdi: 0.0,
            min_v: 1.0,
            objective: 0.0,
            penalty: 0.0,
            balanced_f,
        }
    }

    fn buses(ids: &[BusId]) -> Vec<ScenarioResult> {
        ids.iter().map(|&b| result(b, 1.0)).collect()
    }

    #[test]
    fn base_scenarios_are_fixed_weightings() {
        let [a, b, c] = base_scenarios();
        assert_eq!((a.0, a.1.as_array()), ("A", [0.80, 0.10, 0.10]));
        assert_eq!((b.0, b.1.as_array()), ("B", [0.10, 0.80, 0.10]));
        assert_eq!((c.0, c.1.as_array()), ("C", [0.40, 0.20, 0.40]));
        for (_, w) in [a, b, c] {
            assert!((w.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn adaptive_weights_stay_near_uniform() {
        let lo = (UNIFORM_WEIGHT - WEIGHT_PERTURBATION) / (UNIFORM_WEIGHT * 3.0 + WEIGHT_PERTURBATION);
        let hi = (UNIFORM_WEIGHT + WEIGHT_PERTURBATION) / (UNIFORM_WEIGHT * 3.0 - WEIGHT_PERTURBATION);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let w = adaptive_weights(&mut rng).as_array();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x >= lo && x <= hi), "{w:?}");
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(8);
        let mut r2 = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(adaptive_weights(&mut r1), adaptive_weights(&mut r2));
    }

    #[test]
    fn convergence_on_repeated_bus() {
        assert_eq!(check_convergence(&buses(&[7, 11, 15, 14, 14])), Some(14));
        assert_eq!(check_convergence(&buses(&[7, 11, 15])), None);
        assert_eq!(check_convergence(&buses(&[7, 7])), Some(7));
    }

    #[test]
    fn ties_go_to_lower_balanced_objective() {
        let rs = vec![result(7, 0.9), result(11, 0.5), result(7, 0.8), result(11, 0.6)];
        assert_eq!(check_convergence(&rs), Some(11));
        let singles = vec![result(7, 0.9), result(11, 0.4), result(15, 0.7)];
        assert_eq!(modal_bus(&singles), Some((11, 1)));
        let even = vec![result(9, 0.5), result(3, 0.5)];
        assert_eq!(modal_bus(&even), Some((3, 1)));
    }

    #[test]
    fn scenario_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..20).map(|i| scenario_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert_eq!(scenario_seed(42, 3), scenario_seed(42, 3));
        assert_ne!(scenario_seed(42, 3), scenario_seed(43, 3));
    }
}

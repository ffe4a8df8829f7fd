//! Normalized weighted objective over (bus, DG size) candidates.
//!
//! `f = w1·P_loss/P_loss,0 + w2·VDI/VDI_0 + w3·C/C_max + penalty`

use serde::{Deserialize, Serialize};

use crate::economics::EconomicData;
use crate::error::{Error, Result};
use crate::metrics::{collect_metrics, MetricSet, VoltageLimits};
use crate::network::{BusId, NetworkModel};
use crate::powerflow::{solve, PowerFlowSolution, SolverSettings};

/// Largest DG size for the built-in case, 60% of the feeder load as quoted for the study.
pub const DEFAULT_P_DG_MAX: f64 = 3609.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub bus: BusId,
    /// DG size, kW.
    pub p_dg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for DgBounds {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: DEFAULT_P_DG_MAX,
        }
    }
}

impl DgBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min >= 0.0 && min <= max && max > 0.0) {
            return Err(Error::Config(format!(
                "DG bounds must satisfy 0 <= min <= max, max > 0; got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p_dg: f64) -> bool {
        p_dg >= self.min && p_dg <= self.max
    }

    pub fn clamp(&self, p_dg: f64) -> f64 {
        p_dg.clamp(self.min, self.max)
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct WeightVector([f64; 3]);

impl WeightVector {
    /// Validates and rescales to unit sum. Vectors already summing to one
    /// (within 1e-12) are kept verbatim.
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let w = [w1, w2, w3];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config(format!(
                "weights must be finite and >= 0, got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Config("weights must not all be zero".into()));
        }
        if (sum - 1.0).abs() <= 1e-12 {
            Ok(Self(w))
        } else {
            Ok(Self(w.map(|x| x / sum)))
        }
    }

    pub fn balanced() -> Self {
        Self([1.0 / 3.0; 3])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn loss(&self) -> f64 {
        self.0[0]
    }

    pub fn vdi(&self) -> f64 {
        self.0[1]
    }

    pub fn cost(&self) -> f64 {
        self.0[2]
    }
}

impl From<WeightVector> for [f64; 3] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl TryFrom<[f64; 3]> for WeightVector {
    type Error = Error;

    fn try_from(w: [f64; 3]) -> Result<Self> {
        Self::new(w[0], w[1], w[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Base-case active loss, kW.
    pub p_loss_0: f64,
    pub vdi_0: f64,
    /// Cost normalizer, USD.
    pub c_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub f: f64,
    pub loss_term: f64,
    pub vdi_term: f64,
    pub cost_term: f64,
    pub penalty: f64,
    pub metrics: MetricSet,
    /// Investment, USD.
    pub cost: f64,
    pub weights: WeightVector,
}

/// Solves the no-DG case and assembles the normalizers.
pub fn compute_baselines(
    net: &NetworkModel,
    econ: &EconomicData,
    p_dg_max: f64,
    settings: &SolverSettings,
) -> Result<Baselines> {
    let sol = solve(net, settings)?;
    if !sol.converged {
        return Err(Error::BaseCaseDiverged(sol.iterations));
    }
    let p_loss_0 = sol.total_loss;
    let vdi_0 = crate::metrics::vdi(&sol);
    let c_max = econ.c_max(p_dg_max);
    for (name, value) in [
        ("base-case loss", p_loss_0),
        ("base-case VDI", vdi_0),
        ("C_max", c_max),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::DegenerateBaseline(format!(
                "{name} must be > 0, got {value}"
            )));
        }
    }
    Ok(Baselines {
        p_loss_0,
        vdi_0,
        c_max,
    })
}

/// Everything needed to score a candidate: feeder, economics, limits, bounds and baselines.
///
/// Immutable once built; `evaluate` takes `&self` and may be called from many threads.
#[derive(Debug, Clone)]
pub struct Problem {
    net: NetworkModel,
    econ: EconomicData,
    limits: VoltageLimits,
    bounds: DgBounds,
    settings: SolverSettings,
    baselines: Baselines,
    candidates: Vec<BusId>,
}

impl Problem {
    pub fn new(
        net: NetworkModel,
        econ: EconomicData,
        limits: VoltageLimits,
        bounds: DgBounds,
        settings: SolverSettings,
    ) -> Result<Self> {
        let candidates = net.candidate_buses();
        if candidates.is_empty() {
            return Err(Error::Config("network has no candidate buses".into()));
        }
        econ.ensure_covers(&candidates)?;
        let baselines = compute_baselines(&net, &econ, bounds.max, &settings)?;
        Ok(Self {
            net,
            econ,
            limits,
            bounds,
            settings,
            baselines,
            candidates,
        })
    }

    pub fn network(&self) -> &NetworkModel {
        &self.net
    }

    pub fn economics(&self) -> &EconomicData {
        &self.econ
    }

    pub fn limits(&self) -> &VoltageLimits {
        &self.limits
    }

    pub fn bounds(&self) -> DgBounds {
        self.bounds
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn baselines(&self) -> &Baselines {
        &self.baselines
    }

    pub fn candidates(&self) -> &[BusId] {
        &self.candidates
    }

    pub fn check_candidate(&self, cand: &CandidateSolution) -> Result<()> {
        if cand.bus == self.net.slack_bus() {
            return Err(Error::SlackBus(cand.bus));
        }
        if self.candidates.binary_search(&cand.bus).is_err() {
            return Err(Error::UnknownBus(cand.bus));
        }
        if !self.bounds.contains(cand.p_dg) {
            return Err(Error::OutOfBounds(format!(
                "DG size {} kW outside [{}, {}]",
                cand.p_dg, self.bounds.min, self.bounds.max
            )));
        }
        Ok(())
    }

    /// Load flow of the feeder with the candidate's injection applied.
    pub fn load_flow(&self, cand: &CandidateSolution) -> Result<PowerFlowSolution> {
        self.check_candidate(cand)?;
        solve(&self.net.apply_dg(cand.bus, cand.p_dg)?, &self.settings)
    }

    pub fn evaluate(&self, cand: &CandidateSolution, w: &WeightVector) -> Result<ObjectiveBreakdown> {
        let sol = self.load_flow(cand)?;
        let metrics = collect_metrics(&sol, &self.limits);
        let cost = self.econ.investment_cost(cand.bus, cand.p_dg)?;
        let loss_term = metrics.p_loss / self.baselines.p_loss_0;
        let vdi_term = metrics.vdi / self.baselines.vdi_0;
        let cost_term = cost / self.baselines.c_max;
        let f = w.loss() * loss_term + w.vdi() * vdi_term + w.cost() * cost_term + metrics.penalty;
        Ok(ObjectiveBreakdown {
            f,
            loss_term,
            vdi_term,
            cost_term,
            penalty: metrics.penalty,
            metrics,
            cost,
            weights: *w,
        })
    }
}

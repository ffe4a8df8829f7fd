//! JSON/CSV report rows. kW to 2 decimals, p.u. and VDI to 4, USD to whole dollars.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{collect_metrics, VoltageLimits};
use crate::network::{write_records, BusId, NetworkModel};
use crate::objective::{Baselines, ObjectiveBreakdown, WeightVector};
use crate::powerflow::PowerFlowSolution;
use crate::scenario::{FinalDesign, MultiScenarioRun, ScenarioResult};

pub fn kw(x: f64) -> f64 {
    round_to(x, 2)
}

pub fn pu(x: f64) -> f64 {
    round_to(x, 4)
}

pub fn usd(x: f64) -> i64 {
    x.round() as i64
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

fn objective(x: f64) -> f64 {
    round_to(x, 6)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_records(path, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct VoltageRow {
    pub bus: BusId,
    pub v_pu: f64,
}

pub fn voltage_profile(sol: &PowerFlowSolution) -> Vec<VoltageRow> {
    let mut rows: Vec<VoltageRow> = sol
        .bus_ids
        .iter()
        .zip(sol.magnitudes())
        .map(|(&bus, m)| VoltageRow { bus, v_pu: pu(m) })
        .collect();
    rows.sort_by_key(|r| r.bus);
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub generation: usize,
    pub best_f: f64,
}

pub fn convergence(history: &[f64]) -> Vec<ConvergenceRow> {
    history
        .iter()
        .enumerate()
        .map(|(i, &f)| ConvergenceRow {
            generation: i + 1,
            best_f: objective(f),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DgInjection {
    pub bus: BusId,
    pub kw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BusVoltage {
    pub bus: BusId,
    pub v_pu: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchFlow {
    pub from: BusId,
    pub to: BusId,
    pub current_pu: f64,
    pub loss_kw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinVoltage {
    pub bus: BusId,
    pub v_pu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoadflowReport {
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
    pub dg: Option<DgInjection>,
    pub total_loss_kw: f64,
    pub slack_p_kw: f64,
    pub slack_q_kvar: f64,
    pub vdi: f64,
    pub min_voltage: MinVoltage,
    pub penalty: f64,
    pub buses: Vec<BusVoltage>,
    pub branches: Vec<BranchFlow>,
}

impl LoadflowReport {
    pub fn new(
        net: &NetworkModel,
        sol: &PowerFlowSolution,
        limits: &VoltageLimits,
        dg: Option<(BusId, f64)>,
    ) -> Self {
        let metrics = collect_metrics(sol, limits);
        let mut buses: Vec<BusVoltage> = sol
            .bus_ids
            .iter()
            .zip(&sol.voltages)
            .map(|(&bus, v)| BusVoltage {
                bus,
                v_pu: pu(v.norm()),
                angle_deg: pu(v.arg().to_degrees()),
            })
            .collect();
        buses.sort_by_key(|b| b.bus);
        let branches = net
            .branches()
            .iter()
            .zip(sol.branch_currents.iter().zip(&sol.branch_losses))
            .map(|(br, (i, &loss))| BranchFlow {
                from: br.from_bus,
                to: br.to_bus,
                current_pu: round_to(i.norm(), 6),
                loss_kw: kw(loss),
            })
            .collect();
        Self {
            converged: sol.converged,
            iterations: sol.iterations,
            max_mismatch_pu: sol.max_mismatch,
            dg: dg.map(|(bus, p)| DgInjection { bus, kw: kw(p) }),
            total_loss_kw: kw(sol.total_loss),
            slack_p_kw: kw(sol.slack_injection.re),
            slack_q_kvar: kw(sol.slack_injection.im),
            vdi: pu(metrics.vdi),
            min_voltage: MinVoltage {
                bus: metrics.min_v_bus,
                v_pu: pu(metrics.min_v),
            },
            penalty: metrics.penalty,
            buses,
            branches,
        }
    }
}

/// One row of the scenario table; also used for the base case and the final design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub label: String,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w3: Option<f64>,
    pub bus: Option<BusId>,
    pub dg_kw: f64,
    pub investment_usd: i64,
    pub loss_kw: f64,
    pub vdi: f64,
    pub min_v: f64,
    pub objective: Option<f64>,
    pub converged: Option<bool>,
}

impl ScenarioRow {
    pub fn base(baselines: &Baselines, min_v: f64) -> Self {
        Self {
            label: "base".into(),
            w1: None,
            w2: None,
            w3: None,
            bus: None,
            dg_kw: 0.0,
            investment_usd: 0,
            loss_kw: kw(baselines.p_loss_0),
            vdi: pu(baselines.vdi_0),
            min_v: pu(min_v),
            objective: None,
            converged: None,
        }
    }

    pub fn scenario(r: &ScenarioResult) -> Self {
        let [w1, w2, w3] = r.weights.as_array();
        Self {
            label: r.label.clone(),
            w1: Some(w1),
            w2: Some(w2),
            w3: Some(w3),
            bus: Some(r.bus),
            dg_kw: kw(r.p_dg),
            investment_usd: usd(r.cost),
            loss_kw: kw(r.p_loss),
            vdi: pu(r.vdi),
            min_v: pu(r.min_v),
            objective: Some(objective(r.objective)),
            converged: None,
        }
    }

    pub fn final_design(d: &FinalDesign) -> Self {
        let [w1, w2, w3] = d.breakdown.weights.as_array();
        Self {
            label: "final".into(),
            w1: Some(w1),
            w2: Some(w2),
            w3: Some(w3),
            bus: Some(d.bus),
            dg_kw: kw(d.p_dg),
            investment_usd: usd(d.breakdown.cost),
            loss_kw: kw(d.breakdown.metrics.p_loss),
            vdi: pu(d.breakdown.metrics.vdi),
            min_v: pu(d.breakdown.metrics.min_v),
            objective: Some(objective(d.breakdown.f)),
            converged: Some(d.converged),
        }
    }
}

/// base row, every scenario in run order, then the final design.
pub fn scenario_table(run: &MultiScenarioRun, baselines: &Baselines, base_min_v: f64) -> Vec<ScenarioRow> {
    std::iter::once(ScenarioRow::base(baselines, base_min_v))
        .chain(run.results.iter().map(ScenarioRow::scenario))
        .chain(std::iter::once(ScenarioRow::final_design(&run.final_design)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenariosReport {
    pub master_seed: u64,
    pub converged: bool,
    pub scenarios_run: usize,
    /// Table view, rounded.
    pub rows: Vec<ScenarioRow>,
    /// Unrounded per-scenario results; re-evaluating (bus, p_dg, weights) reproduces them.
    pub results: Vec<ScenarioResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakdownReport {
    pub weights: WeightVector,
    pub f: f64,
    pub loss_term: f64,
    pub vdi_term: f64,
    pub cost_term: f64,
    pub penalty: f64,
}

impl From<&ObjectiveBreakdown> for BreakdownReport {
    fn from(b: &ObjectiveBreakdown) -> Self {
        Self {
            weights: b.weights,
            f: objective(b.f),
            loss_term: objective(b.loss_term),
            vdi_term: objective(b.vdi_term),
            cost_term: objective(b.cost_term),
            penalty: b.penalty,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalDesignReport {
    pub converged: bool,
    pub scenarios_run: usize,
    pub bus: BusId,
    pub dg_kw: f64,
    /// Unrounded mean size, for re-evaluation.
    pub dg_kw_exact: f64,
    pub investment_usd: i64,
    pub loss_kw: f64,
    pub vdi: f64,
    pub min_v: f64,
    pub min_v_bus: BusId,
    pub loss_reduction_pct: f64,
    pub contributing: Vec<String>,
    pub contributing_dg_kw: Vec<f64>,
    pub breakdown: BreakdownReport,
}

impl FinalDesignReport {
    pub fn new(d: &FinalDesign, baselines: &Baselines) -> Self {
        let m = &d.breakdown.metrics;
        Self {
            converged: d.converged,
            scenarios_run: d.scenarios_run,
            bus: d.bus,
            dg_kw: kw(d.p_dg),
            dg_kw_exact: d.p_dg,
            investment_usd: usd(d.breakdown.cost),
            loss_kw: kw(m.p_loss),
            vdi: pu(m.vdi),
            min_v: pu(m.min_v),
            min_v_bus: m.min_v_bus,
            loss_reduction_pct: kw(100.0 * (1.0 - m.p_loss / baselines.p_loss_0)),
            contributing: d.contributing.iter().map(|r| r.label.clone()).collect(),
            contributing_dg_kw: d.contributing.iter().map(|r| kw(r.p_dg)).collect(),
            breakdown: (&d.breakdown).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub seed: u64,
    pub evaluations: usize,
    pub result: ScenarioResult,
    pub breakdown: BreakdownReport,
}

/// File-name friendly scenario label: `Adaptive-4` becomes `adaptive-4`.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

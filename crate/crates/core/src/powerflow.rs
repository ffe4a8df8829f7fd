//! Backward/forward sweep load flow for radial feeders.
//!
//! Loads are constant-power. Each iteration computes load currents from the
//! present voltages, accumulates branch currents from the leaves to the root,
//! then walks root-to-leaves applying `V_child = V_parent - Z * I_branch`.
//! The loop stops once no bus voltage moves by more than the tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Largest per-iteration change of any bus voltage (p.u.) accepted as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "solver tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("solver max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Bus ids, parallel to `voltages`.
    pub bus_ids: Vec<BusId>,
    /// Complex bus voltages in p.u.
    pub voltages: Vec<Complex64>,
    /// Branch currents in p.u., parallel to `NetworkModel::branches`, positive away from the slack.
    pub branch_currents: Vec<Complex64>,
    /// Active loss per branch in kW.
    pub branch_losses: Vec<f64>,
    /// Total active loss in kW.
    pub total_loss: f64,
    /// Complex power delivered by the slack bus, kW + j kVAr.
    pub slack_injection: Complex64,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.voltages.iter().map(|v| v.norm())
    }

    pub fn voltage(&self, bus: BusId) -> Option<Complex64> {
        self.bus_ids
            .iter()
            .position(|&id| id == bus)
            .map(|i| self.voltages[i])
    }

    /// Bus with the lowest voltage magnitude; ties go to the lowest bus id.
    pub fn min_voltage(&self) -> (BusId, f64) {
        self.extreme_voltage(|candidate, best| candidate < best)
    }

    /// Bus with the highest voltage magnitude; ties go to the lowest bus id.
    pub fn max_voltage(&self) -> (BusId, f64) {
        self.extreme_voltage(|candidate, best| candidate > best)
    }

    fn extreme_voltage(&self, better: impl Fn(f64, f64) -> bool) -> (BusId, f64) {
        let mut best: Option<(BusId, f64)> = None;
        for (&id, v) in self.bus_ids.iter().zip(&self.voltages) {
            let mag = v.norm();
            best = match best {
                None => Some((id, mag)),
                Some((bid, bmag)) if better(mag, bmag) || (mag == bmag && id < bid) => Some((id, mag)),
                keep => keep,
            };
        }
        best.unwrap_or((0, f64::NAN))
    }
}

/// Solves the load flow of `net` from a flat start.
///
/// Non-convergence is reported through `converged = false`, not as an error.
pub fn solve(net: &NetworkModel, settings: &SolverSettings) -> Result<PowerFlowSolution> {
    settings.validate()?;
    let base = net.base();
    let z_base = base.z_base();
    let kw_base = base.kw_base();
    let order = net.radial_order();
    let n = net.buses().len();

    let demand: Vec<Complex64> = net
        .buses()
        .iter()
        .map(|b| Complex64::new(b.p_load, b.q_load) / kw_base)
        .collect();
    let impedance: Vec<Complex64> = order
        .branches
        .iter()
        .map(|ob| {
            let br = &net.branches()[ob.branch];
            Complex64::new(br.r, br.x) / z_base
        })
        .collect();

    let mut voltages = vec![Complex64::new(1.0, 0.0); n];
    let mut flows = vec![Complex64::new(0.0, 0.0); order.len()];
    let mut injected = vec![Complex64::new(0.0, 0.0); n];
    let mut converged = false;
    let mut iterations = 0;
    let mut max_mismatch = f64::INFINITY;

    while iterations < settings.max_iterations {
        iterations += 1;
        backward_sweep(net, &demand, &voltages, &mut injected, &mut flows);

        let mut mismatch: f64 = 0.0;
        for (k, ob) in order.branches.iter().enumerate() {
            let updated = voltages[ob.parent] - impedance[k] * flows[k];
            let change = (updated - voltages[ob.child]).norm();
            // NaN must not be swallowed by f64::max
            mismatch = if change.is_nan() {
                f64::NAN
            } else {
                mismatch.max(change)
            };
            voltages[ob.child] = updated;
        }
        max_mismatch = mismatch;
        if mismatch < settings.tolerance {
            converged = true;
            break;
        }
        if !mismatch.is_finite() {
            break;
        }
    }

    // Currents consistent with the reported voltages.
    backward_sweep(net, &demand, &voltages, &mut injected, &mut flows);

    let mut branch_currents = vec![Complex64::new(0.0, 0.0); net.branches().len()];
    let mut branch_losses = vec![0.0; net.branches().len()];
    for (k, ob) in order.branches.iter().enumerate() {
        branch_currents[ob.branch] = flows[k];
        branch_losses[ob.branch] = impedance[k].re * flows[k].norm_sqr() * kw_base;
    }
    let total_loss = branch_losses.iter().sum();
    let slack_injection = voltages[order.root] * injected[order.root].conj() * kw_base;

    Ok(PowerFlowSolution {
        bus_ids: net.buses().iter().map(|b| b.id).collect(),
        voltages,
        branch_currents,
        branch_losses,
        total_loss,
        slack_injection,
        converged,
        iterations,
        max_mismatch,
    })
}

/// Leaves-to-root current accumulation. On return `injected[i]` holds the
/// current drawn into bus `i` from upstream, and `flows[k]` the current of
/// the k-th oriented branch.
fn backward_sweep(
    net: &NetworkModel,
    demand: &[Complex64],
    voltages: &[Complex64],
    injected: &mut [Complex64],
    flows: &mut [Complex64],
) {
    for ((acc, s), v) in injected.iter_mut().zip(demand).zip(voltages) {
        *acc = (s / v).conj();
    }
    let order = net.radial_order();
    for (k, ob) in order.branches.iter().enumerate().rev() {
        flows[k] = injected[ob.child];
        let child_total = injected[ob.child];
        injected[ob.parent] += child_total;
    }
}

//! Technical performance indices and the voltage-limit penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powerflow::PowerFlowSolution;

/// Fixed charge applied on any violation or non-converged load flow.
pub const PENALTY_FIXED: f64 = 1e6;
/// Charge per p.u. of summed limit violation.
pub const PENALTY_PER_PU: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        Self {
            v_min: 0.90,
            v_max: 1.05,
        }
    }
}

impl VoltageLimits {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self> {
        if !(v_min > 0.0 && v_min < v_max && v_max.is_finite()) {
            return Err(Error::Config(format!(
                "voltage limits must satisfy 0 < v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        Ok(Self { v_min, v_max })
    }

    fn violation(&self, magnitude: f64) -> f64 {
        (self.v_min - magnitude).max(magnitude - self.v_max).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// Total active loss, kW.
    pub p_loss: f64,
    /// Voltage deviation index, p.u.².
    pub vdi: f64,
    pub min_v: f64,
    pub min_v_bus: u32,
    pub penalty: f64,
}

/// Σ (1 − |V|)² over every bus, slack included.
pub fn vdi(sol: &PowerFlowSolution) -> f64 {
    sol.magnitudes().map(|m| (1.0 - m).powi(2)).sum()
}

pub fn voltage_penalty(sol: &PowerFlowSolution, limits: &VoltageLimits) -> f64 {
    let mut violation = 0.0;
    let mut any_nan = false;
    for m in sol.magnitudes() {
        if m.is_nan() {
            any_nan = true;
        } else {
            violation += limits.violation(m);
        }
    }
    if sol.converged && !any_nan && violation == 0.0 {
        0.0
    } else if violation.is_finite() {
        PENALTY_FIXED + PENALTY_PER_PU * violation
    } else {
        // diverged sweeps can blow up to infinity; keep the penalty finite and ordered
        PENALTY_FIXED + PENALTY_PER_PU * 1e6
    }
}

pub fn collect_metrics(sol: &PowerFlowSolution, limits: &VoltageLimits) -> MetricSet {
    let (min_v_bus, min_v) = sol.min_voltage();
    MetricSet {
        p_loss: sol.total_loss,
        vdi: vdi(sol),
        min_v,
        min_v_bus,
        penalty: voltage_penalty(sol, limits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ieee33;
    use crate::powerflow::{solve, SolverSettings};
    use num_complex::Complex64;

    fn synthetic(mags: &[f64], converged: bool) -> PowerFlowSolution {
        PowerFlowSolution {
            bus_ids: (1..=mags.len() as u32).collect(),
            voltages: mags.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            branch_currents: vec![],
            branch_losses: vec![],
            total_loss: 0.0,
            slack_injection: Complex64::new(0.0, 0.0),
            converged,
            iterations: 1,
            max_mismatch: 0.0,
        }
    }

    #[test]
    fn flat_profile_has_zero_vdi_and_penalty() {
        let sol = synthetic(&[1.0; 5], true);
        assert_eq!(vdi(&sol), 0.0);
        assert_eq!(voltage_penalty(&sol, &VoltageLimits::default()), 0.0);
        let m = collect_metrics(&sol, &VoltageLimits::default());
        assert_eq!((m.p_loss, m.vdi, m.min_v, m.penalty), (0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn single_undervoltage_penalty() {
        let sol = synthetic(&[1.0, 0.95, 0.88], true);
        let p = voltage_penalty(&sol, &VoltageLimits::default());
        let expected = PENALTY_FIXED + PENALTY_PER_PU * 0.02;
        assert!((p - expected).abs() < 1e-6, "{p}");
    }

    #[test]
    fn overvoltage_and_non_convergence_are_penalised() {
        let limits = VoltageLimits::default();
        let over = synthetic(&[1.0, 1.07], true);
        assert!((voltage_penalty(&over, &limits) - (PENALTY_FIXED + PENALTY_PER_PU * 0.02)).abs() < 1e-6);
        let diverged = synthetic(&[1.0, 0.99], false);
        assert_eq!(voltage_penalty(&diverged, &limits), PENALTY_FIXED);
        let nan = synthetic(&[1.0, f64::NAN], false);
        assert!(voltage_penalty(&nan, &limits) >= PENALTY_FIXED);
    }

    #[test]
    fn limits_validation() {
        assert!(VoltageLimits::new(0.9, 1.05).is_ok());
        assert!(VoltageLimits::new(1.05, 0.9).is_err());
        assert!(VoltageLimits::new(0.0, 1.0).is_err());
    }

    #[test]
    fn ieee33_base_metrics() {
        let sol = solve(&ieee33::builtin(), &SolverSettings::default()).unwrap();
        let m = collect_metrics(&sol, &VoltageLimits::default());
        assert!((m.vdi - 0.1171).abs() / 0.1171 < 0.02, "{}", m.vdi);
        assert!(m.min_v > 0.90 && m.min_v < 0.93);
        assert_eq!(m.penalty, 0.0);
    }

    #[test]
    fn vdi_improves_when_a_bus_moves_towards_nominal() {
        let before = synthetic(&[1.0, 0.95, 0.93], true);
        let after = synthetic(&[1.0, 0.96, 0.93], true);
        assert!(vdi(&after) < vdi(&before));
    }
}

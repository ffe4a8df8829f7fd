//! Run configuration: one flat TOML key-value file, overridable from the command line.
//!
//! ```toml
//! network = "ieee33"        # or `buses` + `branches` (+ `base_kv`)
//! economics = "sites.csv"   # omitted: seeded land costs (`land_seed`)
//! unit_dg_cost = 1200
//! v_min = 0.90
//! v_max = 1.05
//! p_dg_max = 3609
//! population_size = 40
//! iterations = 30
//! seed = 7
//! out = "results"
//! ```
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::economics::{default_land_costs, EconomicData, DEFAULT_UNIT_DG_COST};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::ieee33;
use crate::metrics::VoltageLimits;
use crate::network::{BaseQuantities, BusId, NetworkModel};
use crate::objective::{DgBounds, Problem};
use crate::powerflow::SolverSettings;
use crate::scenario::DEFAULT_S_MAX;

pub const BUILTIN_IEEE33: &str = "ieee33";

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<String>,
    pub buses: Option<PathBuf>,
    pub branches: Option<PathBuf>,
    pub economics: Option<PathBuf>,
    pub land_seed: Option<u64>,
    pub base_kv: Option<f64>,
    pub base_mva: Option<f64>,
    pub slack_bus: Option<BusId>,
    pub unit_dg_cost: Option<f64>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub p_dg_min: Option<f64>,
    pub p_dg_max: Option<f64>,
    pub population_size: Option<usize>,
    pub iterations: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub elite_count: Option<usize>,
    pub tournament_size: Option<usize>,
    pub s_max: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub solver_tolerance: Option<f64>,
    pub solver_max_iterations: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.buses,
            &mut cfg.branches,
            &mut cfg.economics,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top;
            network, buses, branches, economics, land_seed, base_kv, base_mva, slack_bus,
            unit_dg_cost, v_min, v_max, p_dg_min, p_dg_max, population_size, iterations,
            crossover_rate, mutation_rate, elite_count, tournament_size, s_max, seed, out,
            solver_tolerance, solver_max_iterations,
        )
    }

    fn is_builtin(&self) -> Result<bool> {
        match (&self.network, &self.buses, &self.branches) {
            (Some(name), None, None) if name == BUILTIN_IEEE33 => Ok(true),
            (Some(name), _, _) if name != BUILTIN_IEEE33 => Err(Error::Config(format!(
                "unknown built-in network `{name}` (available: {BUILTIN_IEEE33})"
            ))),
            (Some(_), _, _) => Err(Error::Config(
                "choose either the built-in network or buses/branches files, not both".into(),
            )),
            (None, None, None) => Ok(true),
            (None, Some(_), Some(_)) => Ok(false),
            (None, _, _) => Err(Error::Config(
                "buses and branches files must be given together".into(),
            )),
        }
    }

    pub fn network_model(&self) -> Result<NetworkModel> {
        if self.is_builtin()? {
            if self.base_kv.is_some_and(|kv| kv != ieee33::BASE_KV) {
                return Err(Error::Config(
                    "the built-in feeder has a fixed 12.66 kV base".into(),
                ));
            }
            return Ok(ieee33::builtin());
        }
        let base_kv = self
            .base_kv
            .ok_or_else(|| Error::Config("base_kv is required for file-based networks".into()))?;
        let base = BaseQuantities {
            base_kv,
            base_mva: self.base_mva.unwrap_or(ieee33::BASE_MVA),
        };
        let (buses, branches) = (self.buses.as_ref().unwrap(), self.branches.as_ref().unwrap());
        NetworkModel::load_csv(buses, branches, base, self.slack_bus.unwrap_or(1))
    }

    pub fn economic_data(&self, net: &NetworkModel) -> Result<EconomicData> {
        let unit = self.unit_dg_cost.unwrap_or(DEFAULT_UNIT_DG_COST);
        let seed = self.land_seed.unwrap_or(0);
        match &self.economics {
            Some(path) => EconomicData::load_csv(path, unit),
            None if self.is_builtin()? => EconomicData::new(default_land_costs(seed).land_cost, unit),
            None => EconomicData::sampled(&net.candidate_buses(), seed, unit),
        }
    }

    pub fn limits(&self) -> Result<VoltageLimits> {
        let d = VoltageLimits::default();
        VoltageLimits::new(self.v_min.unwrap_or(d.v_min), self.v_max.unwrap_or(d.v_max))
    }

    pub fn bounds(&self) -> Result<DgBounds> {
        let d = DgBounds::default();
        DgBounds::new(self.p_dg_min.unwrap_or(d.min), self.p_dg_max.unwrap_or(d.max))
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let d = SolverSettings::default();
        let s = SolverSettings {
            tolerance: self.solver_tolerance.unwrap_or(d.tolerance),
            max_iterations: self.solver_max_iterations.unwrap_or(d.max_iterations),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn ga_config(&self) -> Result<GaConfig> {
        let d = GaConfig::default();
        let cfg = GaConfig {
            population_size: self.population_size.unwrap_or(d.population_size),
            iterations: self.iterations.unwrap_or(d.iterations),
            crossover_rate: self.crossover_rate.unwrap_or(d.crossover_rate),
            mutation_rate: self.mutation_rate.unwrap_or(d.mutation_rate),
            elite_count: self.elite_count.unwrap_or(d.elite_count),
            tournament_size: self.tournament_size.unwrap_or(d.tournament_size),
            seed: self.seed(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn s_max(&self) -> Result<usize> {
        let s = self.s_max.unwrap_or(DEFAULT_S_MAX);
        if s < 3 {
            return Err(Error::Config(format!("s_max must be >= 3, got {s}")));
        }
        Ok(s)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn problem(&self) -> Result<Problem> {
        let net = self.network_model()?;
        let econ = self.economic_data(&net)?;
        Problem::new(net, econ, self.limits()?, self.bounds()?, self.solver_settings()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_builtin_study() {
        let cfg = RunConfig::default();
        let ga = cfg.ga_config().unwrap();
        assert_eq!((ga.population_size, ga.iterations), (40, 30));
        assert_eq!(
            cfg.bounds().unwrap(),
            DgBounds {
                min: 0.0,
                max: 3609.0
            }
        );
        assert_eq!(
            cfg.limits().unwrap(),
            VoltageLimits {
                v_min: 0.9,
                v_max: 1.05
            }
        );
        assert_eq!(cfg.s_max().unwrap(), 10);
        let p = cfg.problem().unwrap();
        assert_eq!(p.network().buses().len(), 33);
        assert_eq!(p.economics().unit_dg_cost, 1200.0);
    }

    #[test]
    fn file_values_resolve_relative_paths_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "buses = \"b.csv\"\nbranches = \"l.csv\"\nseed = 3\nout = \"o\"\n",
        )
        .unwrap();
        let file = RunConfig::from_file(&path).unwrap();
        assert_eq!(file.buses.as_deref(), Some(dir.path().join("b.csv").as_path()));
        assert_eq!(file.out.as_deref(), Some(dir.path().join("o").as_path()));
        let merged = file.overlay(RunConfig {
            seed: Some(9),
            ..Default::default()
        });
        assert_eq!(merged.seed(), 9);
        assert!(merged.buses.is_some());
    }

    #[test]
    fn rejects_unknown_keys_and_conflicting_sources() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "populaton_size = 10\n").unwrap();
        assert!(matches!(RunConfig::from_file(&path), Err(Error::Config(_))));

        let both = RunConfig {
            network: Some("ieee33".into()),
            buses: Some("b.csv".into()),
            branches: Some("l.csv".into()),
            ..Default::default()
        };
        assert!(both.network_model().is_err());
        let half = RunConfig {
            buses: Some("b.csv".into()),
            ..Default::default()
        };
        assert!(half.network_model().is_err());
        let other = RunConfig {
            network: Some("ieee69".into()),
            ..Default::default()
        };
        assert!(other.network_model().is_err());
        let bad = RunConfig {
            elite_count: Some(40),
            ..Default::default()
        };
        assert!(bad.ga_config().is_err());
        assert!(RunConfig {
            s_max: Some(2),
            ..Default::default()
        }
        .s_max()
        .is_err());
    }
}

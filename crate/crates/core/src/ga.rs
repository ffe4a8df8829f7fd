//! Genetic algorithm over the mixed (integer bus, real DG size) genome.
//!
//! Generational cycle with elitism: evaluate, keep the `elite_count` best,
//! fill the rest by tournament selection, uniform/arithmetic crossover and
//! resampling/step mutation. Every stochastic choice draws from one
//! ChaCha8 stream seeded from [`GaConfig::seed`], in a fixed order, so runs
//! replay exactly. Fitness evaluation is parallel but order-preserving.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BusId;
use crate::objective::{CandidateSolution, DgBounds, ObjectiveBreakdown, Problem, WeightVector};

pub type GaRng = ChaCha8Rng;

/// Relative half-width of the DG-size mutation step.
pub const MUTATION_STEP: f64 = 0.1;

/// Population 40 over 30 generations. The mutation rate is high for a GA
/// because the genome has only two genes; with a low rate the bus gene
/// stalls on a neighbour of the optimum in a sizeable share of seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            iterations: 30,
            crossover_rate: 0.8,
            mutation_rate: 0.6,
            elite_count: 2,
            tournament_size: 4,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.population_size < 2 {
            return bad(format!(
                "population_size must be >= 2, got {}",
                self.population_size
            ));
        }
        if self.elite_count >= self.population_size {
            return bad(format!(
                "elite_count ({}) must be below population_size ({})",
                self.elite_count, self.population_size
            ));
        }
        if self.tournament_size < 2 {
            return bad(format!(
                "tournament_size must be >= 2, got {}",
                self.tournament_size
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> GaRng {
        GaRng::seed_from_u64(self.seed)
    }
}

/// Candidate buses and DG-size bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub buses: Vec<BusId>,
    pub bounds: DgBounds,
}

impl SearchSpace {
    pub fn of(problem: &Problem) -> Self {
        Self {
            buses: problem.candidates().to_vec(),
            bounds: problem.bounds(),
        }
    }

    pub fn contains(&self, c: &CandidateSolution) -> bool {
        self.buses.contains(&c.bus) && self.bounds.contains(c.p_dg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub candidate: CandidateSolution,
    pub fitness: f64,
}

pub fn init_population(cfg: &GaConfig, space: &SearchSpace, rng: &mut GaRng) -> Vec<CandidateSolution> {
    (0..cfg.population_size)
        .map(|_| CandidateSolution {
            bus: random_bus(space, rng),
            p_dg: random_size(space.bounds, rng),
        })
        .collect()
}

/// Tournament selection: `tournament_size` draws with replacement, lowest fitness wins.
pub fn select<'a>(population: &'a [Individual], cfg: &GaConfig, rng: &mut GaRng) -> &'a Individual {
    let mut winner = &population[rng.random_range(0..population.len())];
    for _ in 1..cfg.tournament_size {
        let challenger = &population[rng.random_range(0..population.len())];
        if challenger.fitness < winner.fitness {
            winner = challenger;
        }
    }
    winner
}

/// Uniform crossover on the bus gene, arithmetic blend on the size gene.
pub fn crossover(
    p1: &CandidateSolution,
    p2: &CandidateSolution,
    cfg: &GaConfig,
    rng: &mut GaRng,
) -> (CandidateSolution, CandidateSolution) {
    if rng.random::<f64>() >= cfg.crossover_rate {
        return (*p1, *p2);
    }
    let swap = rng.random_bool(0.5);
    let alpha: f64 = rng.random();
    let (b1, b2) = if swap { (p2.bus, p1.bus) } else { (p1.bus, p2.bus) };
    let lo = p1.p_dg.min(p2.p_dg);
    let hi = p1.p_dg.max(p2.p_dg);
    let blend = |a: f64, b: f64| (a * alpha + b * (1.0 - alpha)).clamp(lo, hi);
    (
        CandidateSolution {
            bus: b1,
            p_dg: blend(p1.p_dg, p2.p_dg),
        },
        CandidateSolution {
            bus: b2,
            p_dg: blend(p2.p_dg, p1.p_dg),
        },
    )
}

pub fn mutate(
    ind: &CandidateSolution,
    cfg: &GaConfig,
    space: &SearchSpace,
    rng: &mut GaRng,
) -> CandidateSolution {
    let mut out = *ind;
    if rng.random::<f64>() < cfg.mutation_rate {
        out.bus = random_bus(space, rng);
    }
    if rng.random::<f64>() < cfg.mutation_rate {
        let step = rng.random_range(-MUTATION_STEP..=MUTATION_STEP) * space.bounds.span();
        out.p_dg = space.bounds.clamp(out.p_dg + step);
    }
    out
}

/// Outcome of [`evolve`]: the best candidate ever evaluated and the per-generation record.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub best: CandidateSolution,
    pub best_f: f64,
    /// Best fitness seen so far after each generation; length = `iterations`.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Runs the GA against an arbitrary fitness function.
///
/// `observer` sees every generation's evaluated population, the initial one as generation 0.
pub fn evolve<F, O>(cfg: &GaConfig, space: &SearchSpace, fitness: F, mut observer: O) -> Result<Evolution>
where
    F: Fn(&CandidateSolution) -> Result<f64> + Sync,
    O: FnMut(usize, &[Individual]),
{
    cfg.validate()?;
    if space.buses.is_empty() {
        return Err(Error::Config("search space has no candidate buses".into()));
    }
    let mut rng = cfg.rng();
    let evaluate = |cands: Vec<CandidateSolution>| -> Result<Vec<Individual>> {
        cands
            .into_par_iter()
            .map(|candidate| {
                let f = fitness(&candidate)?;
                Ok(Individual {
                    candidate,
                    fitness: if f.is_nan() { f64::INFINITY } else { f },
                })
            })
            .collect()
    };

    let mut population = evaluate(init_population(cfg, space, &mut rng))?;
    let mut evaluations = population.len();
    observer(0, &population);
    let mut best = *fittest(&population);
    let mut history = Vec::with_capacity(cfg.iterations);

    for generation in 1..=cfg.iterations {
        let mut ranked: Vec<&Individual> = population.iter().collect();
        ranked.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
        let mut next: Vec<Individual> = ranked[..cfg.elite_count].iter().map(|i| **i).collect();

        let mut offspring = Vec::with_capacity(cfg.population_size - next.len());
        while next.len() + offspring.len() < cfg.population_size {
            let p1 = select(&population, cfg, &mut rng).candidate;
            let p2 = select(&population, cfg, &mut rng).candidate;
            let (c1, c2) = crossover(&p1, &p2, cfg, &mut rng);
            offspring.push(mutate(&c1, cfg, space, &mut rng));
            let c2 = mutate(&c2, cfg, space, &mut rng);
            if next.len() + offspring.len() < cfg.population_size {
                offspring.push(c2);
            }
        }
        evaluations += offspring.len();
        next.extend(evaluate(offspring)?);
        population = next;
        observer(generation, &population);

        let gen_best = fittest(&population);
        if gen_best.fitness < best.fitness {
            best = *gen_best;
        }
        history.push(best.fitness);
    }

    Ok(Evolution {
        best: best.candidate,
        best_f: best.fitness,
        history,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaRun {
    pub best: CandidateSolution,
    pub best_breakdown: ObjectiveBreakdown,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Minimizes the weighted objective of `problem` under `weights`.
pub fn run_ga(cfg: &GaConfig, problem: &Problem, weights: &WeightVector) -> Result<GaRun> {
    let space = SearchSpace::of(problem);
    let evo = evolve(cfg, &space, |c| Ok(problem.evaluate(c, weights)?.f), |_, _| {})?;
    let best_breakdown = problem.evaluate(&evo.best, weights)?;
    Ok(GaRun {
        best: evo.best,
        best_breakdown,
        history: evo.history,
        evaluations: evo.evaluations,
    })
}

fn fittest(population: &[Individual]) -> &Individual {
    population
        .iter()
        .min_by(|a, b| a.fitness.partial_cmp(&b.fitness).unwrap_or(Ordering::Equal))
        .expect("population is never empty")
}

fn random_bus(space: &SearchSpace, rng: &mut GaRng) -> BusId {
    space.buses[rng.random_range(0..space.buses.len())]
}

fn random_size(bounds: DgBounds, rng: &mut GaRng) -> f64 {
    if bounds.span() == 0.0 {
        bounds.min
    } else {
        rng.random_range(bounds.min..=bounds.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        SearchSpace {
            buses: (2..=33).collect(),
            bounds: DgBounds::default(),
        }
    }

    fn ind(bus: BusId, p_dg: f64, fitness: f64) -> Individual {
        Individual {
            candidate: CandidateSolution { bus, p_dg },
            fitness,
        }
    }

    #[test]
    fn population_is_seeded_and_in_bounds() {
        let cfg = GaConfig::default().with_seed(17);
        let a = init_population(&cfg, &space(), &mut cfg.rng());
        let b = init_population(&cfg, &space(), &mut cfg.rng());
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|c| space().contains(c)));

        let fixed = SearchSpace {
            buses: vec![4],
            bounds: DgBounds::new(500.0, 500.0).unwrap(),
        };
        let pop = init_population(&cfg, &fixed, &mut cfg.rng());
        assert!(pop.iter().all(|c| c.p_dg == 500.0 && c.bus == 4));
    }

    #[test]
    fn tournament_prefers_lower_fitness() {
        let cfg = GaConfig {
            tournament_size: 2,
            ..GaConfig::default()
        };
        let pop = [ind(3, 10.0, 5.0), ind(4, 20.0, 1.0)];
        let mut rng = cfg.rng();
        // the worse member only wins when drawn twice
        let mut wins = [0usize; 2];
        for _ in 0..4000 {
            let w = select(&pop, &cfg, &mut rng);
            wins[(w.candidate.bus - 3) as usize] += 1;
        }
        let frac_worse = wins[0] as f64 / 4000.0;
        assert!((frac_worse - 0.25).abs() < 0.03, "{frac_worse}");

        // a tournament as large as the population almost surely sees the best
        let big = GaConfig {
            tournament_size: 64,
            ..GaConfig::default()
        };
        let pop: Vec<_> = (0..8).map(|i| ind(2 + i, 0.0, 10.0 - i as f64)).collect();
        assert_eq!(select(&pop, &big, &mut rng).candidate.bus, 9);
    }

    #[test]
    fn tournament_on_equal_fitness_is_uniform() {
        let cfg = GaConfig::default();
        let pop: Vec<_> = (0..4).map(|i| ind(2 + i, 0.0, 1.0)).collect();
        let mut rng = cfg.rng();
        let mut counts = [0usize; 4];
        for _ in 0..8000 {
            counts[(select(&pop, &cfg, &mut rng).candidate.bus - 2) as usize] += 1;
        }
        assert!(
            counts.iter().all(|&c| (c as f64 / 8000.0 - 0.25).abs() < 0.03),
            "{counts:?}"
        );
    }

    #[test]
    fn crossover_is_closed_and_convex() {
        let cfg = GaConfig {
            crossover_rate: 1.0,
            ..GaConfig::default()
        };
        let mut rng = cfg.rng();
        let a = CandidateSolution { bus: 7, p_dg: 1000.0 };
        let b = CandidateSolution {
            bus: 11,
            p_dg: 2000.0,
        };
        for _ in 0..500 {
            let (c1, c2) = crossover(&a, &b, &cfg, &mut rng);
            for c in [c1, c2] {
                assert!(c.bus == 7 || c.bus == 11);
                assert!((1000.0..=2000.0).contains(&c.p_dg));
            }
        }
        let (c1, c2) = crossover(&a, &a, &cfg, &mut rng);
        assert_eq!((c1, c2), (a, a));

        let never = GaConfig {
            crossover_rate: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(crossover(&a, &b, &never, &mut rng), (a, b));
    }

    #[test]
    fn mutation_respects_rate_and_bounds() {
        let none = GaConfig {
            mutation_rate: 0.0,
            ..GaConfig::default()
        };
        let always = GaConfig {
            mutation_rate: 1.0,
            ..GaConfig::default()
        };
        let mut rng = none.rng();
        let c = CandidateSolution {
            bus: 14,
            p_dg: 3600.0,
        };
        assert_eq!(mutate(&c, &none, &space(), &mut rng), c);
        for _ in 0..1000 {
            let m = mutate(&c, &always, &space(), &mut rng);
            assert!(space().contains(&m));
            assert!((m.p_dg - 3600.0).abs() <= 0.1 * 3609.0 + 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig {
            population_size: 1,
            elite_count: 0,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            elite_count: 40,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            tournament_size: 1,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            mutation_rate: 1.5,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            iterations: 0,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn evolve_on_a_synthetic_bowl() {
        // optimum at bus 20, 1500 kW
        let f =
            |c: &CandidateSolution| Ok((c.bus as f64 - 20.0).abs() + ((c.p_dg - 1500.0) / 1000.0).powi(2));
        let cfg = GaConfig {
            iterations: 60,
            ..GaConfig::default()
        }
        .with_seed(5);
        let mut generations = 0;
        let evo = evolve(&cfg, &space(), f, |g, pop| {
            generations = g;
            assert_eq!(pop.len(), 40);
            assert!(pop.iter().all(|i| space().contains(&i.candidate)));
        })
        .unwrap();
        assert_eq!(generations, 60);
        assert_eq!(evo.history.len(), 60);
        assert!(evo.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(evo.best.bus, 20);
        assert!((evo.best.p_dg - 1500.0).abs() < 150.0, "{}", evo.best.p_dg);
        assert_eq!(evo.evaluations, 40 + 60 * 38);
        assert_eq!(evo, evolve(&cfg, &space(), f, |_, _| {}).unwrap());
    }
}

//! Generational genetic algorithm over `(K, α)`: tournament selection,
//! uniform crossover, Gaussian mutation and single-member elitism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nrbo::{argmin, candidate_at, clamp_unit, evaluate_batch, record, Bounds, OptResult, Point};

/// Mutation step, as a fraction of each parameter range.
pub const MUTATION_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_n: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_n: 10,
            generations: 20,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            tournament_size: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_n < 2 {
            return Err(Error::invalid("GA population_n must be at least 2"));
        }
        for (name, v) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.tournament_size < 1 {
            return Err(Error::invalid("tournament_size must be at least 1"));
        }
        Ok(())
    }
}

fn tournament(rng: &mut ChaCha8Rng, fit: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] < fit[best] {
            best = c;
        }
    }
    best
}

/// Minimizes `fitness(K, α)` over `bounds`.
pub fn ga_optimize<F>(fitness: F, bounds: &Bounds, cfg: &GaConfig) -> Result<OptResult>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    bounds.validate()?;
    cfg.validate()?;
    let n = cfg.population_n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mutation = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");

    let mut pop: Vec<Point> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let mut fit = evaluate_batch(&fitness, bounds, &pop);
    let mut evaluations = n;

    let mut elite = argmin(&fit);
    let mut history = vec![fit[elite]];
    let mut trace = vec![record(0, bounds, pop[elite], fit[elite])];

    for generation in 1..=cfg.generations {
        let children: Vec<Point> = (1..n)
            .map(|_| {
                let a = pop[tournament(&mut rng, &fit, cfg.tournament_size)];
                let b = pop[tournament(&mut rng, &fit, cfg.tournament_size)];
                let mut child = a;
                if rng.random::<f64>() < cfg.crossover_rate {
                    for (g, other) in child.iter_mut().zip(b) {
                        if rng.random::<bool>() {
                            *g = other;
                        }
                    }
                }
                for g in child.iter_mut() {
                    if rng.random::<f64>() < cfg.mutation_rate {
                        *g += mutation.sample(&mut rng);
                    }
                }
                clamp_unit(child)
            })
            .collect();
        let child_fit = evaluate_batch(&fitness, bounds, &children);
        evaluations += children.len();

        let mut next_pop = Vec::with_capacity(n);
        let mut next_fit = Vec::with_capacity(n);
        next_pop.push(pop[elite]);
        next_fit.push(fit[elite]);
        next_pop.extend(children);
        next_fit.extend(child_fit);
        pop = next_pop;
        fit = next_fit;

        elite = argmin(&fit);
        history.push(fit[elite]);
        trace.push(record(generation, bounds, pop[elite], fit[elite]));
    }

    Ok(OptResult {
        best: candidate_at(bounds, pop[elite], fit[elite]),
        history,
        trace,
        evaluations,
    })
}

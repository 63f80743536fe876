//! Newton-Raphson-based optimizer over the VMD hyperparameters `(K, α)`.
//!
//! The search runs in the unit square; `K` is mapped linearly onto its
//! integer range and rounded only when the fitness is evaluated. Each
//! iteration applies three proposal rounds to the whole population:
//!
//! 1. global step `X_i + r1·(X_g − X_i) + r2·(X_j − X_k)` with `i, j, k`
//!    pairwise distinct;
//! 2. local step `X_i + δ·(X_g − X_i)`, `δ ~ U(δ_lo, δ_hi)`, for members
//!    within `proximity_eps` of the global best;
//! 3. cooperation step `X_leader + r3·(X_i − X_leader)` for members worse
//!    than the leader of their group (random groups of about five,
//!    redrawn every iteration).
//!
//! A proposal replaces its member only if it has strictly lower fitness.
//! Proposals of one round are drawn from a snapshot of the population and
//! may be evaluated concurrently; replacement is applied in member order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{CmsObjective, VmdFit};
use crate::signal_model::PhaseSeries;

/// Search box for `(K, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    pub k_range: [usize; 2],
    pub alpha_range: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { k_range: [3, 10], alpha_range: [500.0, 8000.0] }
    }
}

impl Bounds {
    pub fn new(k_range: [usize; 2], alpha_range: [f64; 2]) -> Result<Self> {
        let b = Bounds { k_range, alpha_range };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let [k_lo, k_hi] = self.k_range;
        let [a_lo, a_hi] = self.alpha_range;
        if k_lo < 1 || k_lo > k_hi {
            return Err(Error::invalid(format!("k_range must satisfy 1 <= min <= max, got [{k_lo}, {k_hi}]")));
        }
        if !(a_lo > 0.0 && a_lo <= a_hi && a_hi.is_finite()) {
            return Err(Error::invalid(format!("alpha_range must satisfy 0 < min <= max, got [{a_lo}, {a_hi}]")));
        }
        Ok(())
    }

    /// Maps a point of the unit square to `(K, α)`, rounding `K`.
    pub fn decode(&self, unit: [f64; 2]) -> (usize, f64) {
        let [k_lo, k_hi] = self.k_range;
        let [a_lo, a_hi] = self.alpha_range;
        let k = k_lo as f64 + unit[0] * (k_hi - k_lo) as f64;
        let k = (k.round() as usize).clamp(k_lo, k_hi);
        let alpha = (a_lo + unit[1] * (a_hi - a_lo)).clamp(a_lo, a_hi);
        (k, alpha)
    }

    pub fn contains(&self, k: usize, alpha: f64) -> bool {
        (self.k_range[0]..=self.k_range[1]).contains(&k)
            && self.alpha_range[0] <= alpha
            && alpha <= self.alpha_range[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub k_modes: usize,
    pub alpha: f64,
    /// Lower is better.
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub best_k: usize,
    pub best_alpha: f64,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best: Candidate,
    /// Best fitness after initialization and after every iteration.
    pub history: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NrboConfig {
    pub population_n: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Normalized distance below which a member counts as close to the best.
    pub proximity_eps: f64,
    pub local_delta_range: [f64; 2],
    /// Iterations without improvement before stopping; 0 disables the check.
    pub stall_limit: usize,
}

impl Default for NrboConfig {
    fn default() -> Self {
        NrboConfig {
            population_n: 10,
            max_iterations: 20,
            seed: 0,
            proximity_eps: 0.05,
            local_delta_range: [-0.1, 0.1],
            stall_limit: 20,
        }
    }
}

impl NrboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_n < 4 {
            return Err(Error::invalid(format!(
                "population_n must be at least 4, got {}",
                self.population_n
            )));
        }
        if !(self.proximity_eps.is_finite() && self.proximity_eps >= 0.0) {
            return Err(Error::invalid("proximity_eps must be finite and non-negative"));
        }
        let [lo, hi] = self.local_delta_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("local_delta_range must be a finite interval"));
        }
        Ok(())
    }
}

pub(crate) type Point = [f64; 2];

pub(crate) fn clamp_unit(p: Point) -> Point {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Evaluates a batch of points in parallel, preserving order.
pub(crate) fn evaluate_batch<F>(fitness: &F, bounds: &Bounds, points: &[Point]) -> Vec<f64>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|&p| {
            let (k, a) = bounds.decode(p);
            sanitize(fitness(k, a))
        })
        .collect()
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn candidate_at(bounds: &Bounds, p: Point, fitness: f64) -> Candidate {
    let (k_modes, alpha) = bounds.decode(p);
    Candidate { k_modes, alpha, fitness }
}

/// Applies greedy replacement for the proposed members.
fn replace_improved(
    pop: &mut [Point],
    fit: &mut [f64],
    members: &[usize],
    proposals: &[Point],
    values: &[f64],
) {
    for ((&i, &p), &v) in members.iter().zip(proposals).zip(values) {
        if v < fit[i] {
            pop[i] = p;
            fit[i] = v;
        }
    }
}

fn distinct_pair(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> (usize, usize) {
    loop {
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if j != exclude && k != exclude && j != k {
            return (j, k);
        }
    }
}

/// Minimizes `fitness(K, α)` over `bounds`.
pub fn optimize<F>(fitness: F, bounds: &Bounds, cfg: &NrboConfig) -> Result<OptResult>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    bounds.validate()?;
    cfg.validate()?;
    let n = cfg.population_n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Point> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let mut fit = evaluate_batch(&fitness, bounds, &pop);
    let mut evaluations = n;

    let mut g = argmin(&fit);
    let mut history = vec![fit[g]];
    let mut trace = vec![record(0, bounds, pop[g], fit[g])];
    let mut stall = 0;

    for iter in 1..=cfg.max_iterations {
        let best = pop[g];

        // Global search.
        let members: Vec<usize> = (0..n).collect();
        let proposals: Vec<Point> = members
            .iter()
            .map(|&i| {
                let (j, k) = distinct_pair(&mut rng, n, i);
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let x = pop[i];
                clamp_unit([
                    x[0] + r1 * (best[0] - x[0]) + r2 * (pop[j][0] - pop[k][0]),
                    x[1] + r1 * (best[1] - x[1]) + r2 * (pop[j][1] - pop[k][1]),
                ])
            })
            .collect();
        let values = evaluate_batch(&fitness, bounds, &proposals);
        evaluations += proposals.len();
        replace_improved(&mut pop, &mut fit, &members, &proposals, &values);

        // Local search around the global best.
        let [d_lo, d_hi] = cfg.local_delta_range;
        let mut members = Vec::new();
        let mut proposals = Vec::new();
        for (i, x) in pop.iter().enumerate() {
            let dist = ((x[0] - best[0]).powi(2) + (x[1] - best[1]).powi(2)).sqrt();
            if dist >= cfg.proximity_eps {
                continue;
            }
            let delta = if d_hi > d_lo { rng.random_range(d_lo..d_hi) } else { d_lo };
            let p = clamp_unit([x[0] + delta * (best[0] - x[0]), x[1] + delta * (best[1] - x[1])]);
            if p != *x {
                members.push(i);
                proposals.push(p);
            }
        }
        let values = evaluate_batch(&fitness, bounds, &proposals);
        evaluations += proposals.len();
        replace_improved(&mut pop, &mut fit, &members, &proposals, &values);

        // Cooperation with the local leader.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let groups = n.div_ceil(5);
        let mut leaders = vec![usize::MAX; groups];
        let mut group_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            let gi = pos % groups;
            group_of[i] = gi;
            if leaders[gi] == usize::MAX || fit[i] < fit[leaders[gi]] {
                leaders[gi] = i;
            }
        }
        let mut members = Vec::new();
        let mut proposals = Vec::new();
        for i in 0..n {
            let leader = leaders[group_of[i]];
            if leader == i || fit[i] <= fit[leader] {
                continue;
            }
            let r3: f64 = rng.random();
            let (l, x) = (pop[leader], pop[i]);
            members.push(i);
            proposals.push(clamp_unit([l[0] + r3 * (x[0] - l[0]), l[1] + r3 * (x[1] - l[1])]));
        }
        let values = evaluate_batch(&fitness, bounds, &proposals);
        evaluations += proposals.len();
        replace_improved(&mut pop, &mut fit, &members, &proposals, &values);

        let previous = fit[g];
        g = argmin(&fit);
        history.push(fit[g]);
        trace.push(record(iter, bounds, pop[g], fit[g]));

        if fit[g] < previous {
            stall = 0;
        } else {
            stall += 1;
            if cfg.stall_limit > 0 && stall >= cfg.stall_limit {
                break;
            }
        }
    }

    Ok(OptResult {
        best: candidate_at(bounds, pop[g], fit[g]),
        history,
        trace,
        evaluations,
    })
}

pub(crate) fn record(iter: usize, bounds: &Bounds, p: Point, fitness: f64) -> TraceRecord {
    let (best_k, best_alpha) = bounds.decode(p);
    TraceRecord { iter, best_k, best_alpha, best_fitness: fitness }
}

/// Tunes `(K, α)` for `phase` by minimizing the sample entropy of the
/// cardiac-band reconstruction, then returns the winning decomposition.
pub fn nrbo_vmd_fit(
    phase: &PhaseSeries,
    bounds: &Bounds,
    cfg: &NrboConfig,
    objective: &CmsObjective,
) -> Result<VmdFit> {
    objective.check_bounds(phase, bounds)?;
    let result = optimize(objective.memoized(phase), bounds, cfg)?;
    objective.finish(phase, result)
}

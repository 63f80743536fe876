//! Sample entropy, used as the regularity score minimized by the optimizers.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::nrbo::{Bounds, Candidate, OptResult};
use crate::reconstruction::{cardiac_signal, BandSpec, Reconstruction};
use crate::signal_model::PhaseSeries;
use crate::vmd::{self, ImfSet, VmdParams, MIN_SIGNAL_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampEnConfig {
    /// Template length m.
    pub embedding_m: usize,
    /// Match tolerance, in multiples of the series' standard deviation.
    pub tolerance_r: f64,
}

impl Default for SampEnConfig {
    fn default() -> Self {
        SampEnConfig { embedding_m: 2, tolerance_r: 0.2 }
    }
}

impl SampEnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_m < 1 {
            return Err(Error::invalid("embedding_m must be at least 1"));
        }
        if !(self.tolerance_r.is_finite() && self.tolerance_r > 0.0) {
            return Err(Error::invalid(format!("tolerance_r must be positive, got {}", self.tolerance_r)));
        }
        Ok(())
    }
}

/// Template match counts: `b` pairs of length-m templates and `a` pairs of
/// length-(m+1) templates within tolerance, self-matches excluded. Both
/// counts range over the first `N - m` start positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchCounts {
    pub a: u64,
    pub b: u64,
}

/// Turns match counts into the entropy value. When no (m+1)-match exists
/// the finite ceiling `ln(B·(N−m))` is returned (B is floored at 1).
pub fn entropy_from_counts(counts: MatchCounts, n: usize, m: usize) -> f64 {
    if counts.a == 0 {
        (counts.b.max(1) as f64 * (n - m) as f64).ln()
    } else {
        -(counts.a as f64 / counts.b as f64).ln()
    }
}

/// Validates the input and returns the absolute match radius.
pub fn match_radius(signal: &[f64], cfg: &SampEnConfig) -> Result<f64> {
    cfg.validate()?;
    if signal.len() < cfg.embedding_m + 2 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for m = {}",
            signal.len(),
            cfg.embedding_m
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite samples"));
    }
    let sd = dsp::std_dev(signal);
    if sd == 0.0 {
        return Err(Error::DegenerateInput("zero-variance series".into()));
    }
    Ok(cfg.tolerance_r * sd)
}

/// Counts template matches. Start positions are sorted by their first
/// sample so each template is only compared against neighbours whose first
/// sample is within `r`.
pub fn count_matches(x: &[f64], m: usize, r: f64) -> MatchCounts {
    let starts = x.len() - m;
    let mut order: Vec<usize> = (0..starts).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));

    let (mut a, mut b) = (0u64, 0u64);
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if x[j] - x[i] > r {
                break;
            }
            if (1..m).all(|l| (x[i + l] - x[j + l]).abs() <= r) {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    MatchCounts { a, b }
}

/// Sample entropy `-ln(A/B)` with Chebyshev matching at `r = tolerance_r · σ`.
pub fn sample_entropy(signal: &[f64], cfg: &SampEnConfig) -> Result<f64> {
    let r = match_radius(signal, cfg)?;
    let counts = count_matches(signal, cfg.embedding_m, r);
    Ok(entropy_from_counts(counts, signal.len(), cfg.embedding_m))
}

/// Fitness assigned when a decomposition leaves no mode in the cardiac band
/// (or fails outright). Larger than any attainable sample entropy.
pub const EMPTY_BAND_PENALTY: f64 = 1.0e3;

/// The optimizers' fitness: decompose with `(K, α)`, rebuild the cardiac
/// band, score its sample entropy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CmsObjective {
    pub sampen: SampEnConfig,
    pub band: BandSpec,
    /// Template for everything but `k_modes` and `alpha`.
    pub vmd: VmdParams,
}

/// Outcome of a hyperparameter search: the winner, its decomposition and
/// the reconstructed cardiac signal.
#[derive(Debug, Clone, PartialEq)]
pub struct VmdFit {
    pub best: Candidate,
    pub imfs: ImfSet,
    pub cms: Reconstruction,
    pub search: OptResult,
}

impl CmsObjective {
    pub fn params(&self, k_modes: usize, alpha: f64) -> VmdParams {
        VmdParams { k_modes, alpha, ..self.vmd }
    }

    pub fn decompose(&self, phase: &PhaseSeries, k_modes: usize, alpha: f64) -> Result<(ImfSet, Reconstruction)> {
        let imfs = vmd::decompose(&phase.phase, phase.rate_hz, &self.params(k_modes, alpha))?;
        let cms = cardiac_signal(&imfs, &self.band);
        Ok((imfs, cms))
    }

    pub fn fitness(&self, phase: &PhaseSeries, k_modes: usize, alpha: f64) -> f64 {
        match self.decompose(phase, k_modes, alpha) {
            Ok((_, cms)) if !cms.empty_band => {
                sample_entropy(&cms.signal, &self.sampen).unwrap_or(EMPTY_BAND_PENALTY)
            }
            _ => EMPTY_BAND_PENALTY,
        }
    }

    /// [`Self::fitness`] behind a memo keyed on `(K, α bits)`. Optimizer
    /// proposals clamped onto the box edges recur often, and each repeat
    /// would otherwise cost a full decomposition.
    pub fn memoized<'a>(&'a self, phase: &'a PhaseSeries) -> impl Fn(usize, f64) -> f64 + Sync + 'a {
        let memo: Mutex<HashMap<(usize, u64), f64>> = Mutex::new(HashMap::new());
        move |k, alpha| {
            let key = (k, alpha.to_bits());
            if let Some(&v) = memo.lock().unwrap().get(&key) {
                return v;
            }
            let v = self.fitness(phase, k, alpha);
            memo.lock().unwrap().insert(key, v);
            v
        }
    }

    /// Rejects searches whose every candidate would fail to decompose.
    pub fn check_bounds(&self, phase: &PhaseSeries, bounds: &Bounds) -> Result<()> {
        bounds.validate()?;
        self.sampen.validate()?;
        self.band.validate()?;
        if phase.len() < MIN_SIGNAL_LEN {
            return Err(Error::invalid(format!(
                "phase series has {} samples, at least {MIN_SIGNAL_LEN} required",
                phase.len()
            )));
        }
        if bounds.k_range[1] > phase.len() / 4 {
            return Err(Error::OverDecomposition { k_modes: bounds.k_range[1], len: phase.len() });
        }
        self.params(bounds.k_range[0], bounds.alpha_range[0]).validate()
    }

    /// Re-runs the decomposition for the search winner.
    pub fn finish(&self, phase: &PhaseSeries, search: OptResult) -> Result<VmdFit> {
        let (imfs, cms) = self.decompose(phase, search.best.k_modes, search.best.alpha)?;
        Ok(VmdFit { best: search.best, imfs, cms, search })
    }
}

//! Variational mode decomposition.
//!
//! The signal is mirror-extended, transformed once, and the alternating
//! updates run entirely on the non-negative half of the spectrum (the
//! analytic-signal representation). Each sweep updates every mode by a
//! Wiener filter centred on its current frequency, moves that frequency to
//! the power-weighted mean of the mode, then takes one dual-ascent step on
//! the reconstruction constraint.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

/// Minimum accepted signal length.
pub const MIN_SIGNAL_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMode {
    /// ω_k = k / 2K (in cycles per sample), i.e. evenly spread over [0, rate/2).
    Uniform,
    Zero,
    /// Log-uniform random draw, sorted.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmdParams {
    pub k_modes: usize,
    pub alpha: f64,
    pub tau: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init_mode: InitMode,
}

impl Default for VmdParams {
    fn default() -> Self {
        VmdParams {
            k_modes: 5,
            alpha: 2000.0,
            tau: 0.0,
            tolerance: 1e-6,
            max_iterations: 500,
            init_mode: InitMode::Uniform,
        }
    }
}

impl VmdParams {
    pub fn with_modes(k_modes: usize, alpha: f64) -> Self {
        VmdParams { k_modes, alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_modes < 1 {
            return Err(Error::invalid("k_modes must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Result of a decomposition. Modes are ordered by ascending centre frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub modes: Vec<Vec<f64>>,
    pub center_freqs_hz: Vec<f64>,
    pub residual: Vec<f64>,
    pub rate_hz: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Relative mode change measured on the last sweep.
    pub final_change: f64,
}

impl ImfSet {
    pub fn k_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }
}

fn initial_omegas(params: &VmdParams, ext_len: usize) -> Vec<f64> {
    let k = params.k_modes;
    match params.init_mode {
        InitMode::Uniform => (0..k).map(|i| 0.5 * i as f64 / k as f64).collect(),
        InitMode::Zero => vec![0.0; k],
        InitMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = (1.0 / ext_len as f64).ln();
            let hi = 0.5f64.ln();
            let mut w: Vec<f64> = (0..k)
                .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
                .collect();
            w.sort_by(f64::total_cmp);
            w
        }
    }
}

struct ModeSlices<'a> {
    re: &'a mut [f64],
    im: &'a mut [f64],
    sum_re: &'a mut [f64],
    sum_im: &'a mut [f64],
    g_re: &'a [f64],
    g_im: &'a [f64],
    freqs: &'a [f64],
}

#[derive(Default)]
struct SweepStats {
    diff_sq: f64,
    old_sq: f64,
    weighted: f64,
    power: f64,
}

const LANES: usize = 4;

/// One Wiener-filter update of a single mode, keeping the running sum of
/// all modes in step. Works on fixed-width chunks with per-lane partial sums
/// so the loop vectorizes; the sub-chunk tail is folded into lane 0.
fn update_mode(s: ModeSlices<'_>, omega: f64, two_alpha: f64) -> SweepStats {
    let mut diff = [0.0f64; LANES];
    let mut old = [0.0f64; LANES];
    let mut wsum = [0.0f64; LANES];
    let mut pow = [0.0f64; LANES];

    #[inline(always)]
    #[allow(clippy::too_many_arguments)]
    fn lane(
        re: &mut f64,
        im: &mut f64,
        sr: &mut f64,
        si: &mut f64,
        gr: f64,
        gi: f64,
        f: f64,
        omega: f64,
        two_alpha: f64,
    ) -> [f64; 4] {
        let (old_re, old_im) = (*re, *im);
        let others_re = *sr - old_re;
        let others_im = *si - old_im;
        let d = f - omega;
        let w = 1.0 / (1.0 + two_alpha * d * d);
        let new_re = (gr - others_re) * w;
        let new_im = (gi - others_im) * w;
        let p = new_re * new_re + new_im * new_im;
        let (dr, di) = (new_re - old_re, new_im - old_im);
        *re = new_re;
        *im = new_im;
        *sr = others_re + new_re;
        *si = others_im + new_im;
        [dr * dr + di * di, old_re * old_re + old_im * old_im, f * p, p]
    }

    let ModeSlices { re, im, sum_re, sum_im, g_re, g_im, freqs } = s;
    let mut chunks = re
        .chunks_exact_mut(LANES)
        .zip(im.chunks_exact_mut(LANES))
        .zip(sum_re.chunks_exact_mut(LANES))
        .zip(sum_im.chunks_exact_mut(LANES))
        .zip(g_re.chunks_exact(LANES))
        .zip(g_im.chunks_exact(LANES))
        .zip(freqs.chunks_exact(LANES));
    for ((((((re, im), sr), si), gr), gi), f) in &mut chunks {
        for l in 0..LANES {
            let [a, b, c, d] = lane(&mut re[l], &mut im[l], &mut sr[l], &mut si[l], gr[l], gi[l], f[l], omega, two_alpha);
            diff[l] += a;
            old[l] += b;
            wsum[l] += c;
            pow[l] += d;
        }
    }
    let body = freqs.len() - freqs.len() % LANES;
    for j in body..freqs.len() {
        let [a, b, c, d] = lane(&mut re[j], &mut im[j], &mut sum_re[j], &mut sum_im[j], g_re[j], g_im[j], freqs[j], omega, two_alpha);
        diff[0] += a;
        old[0] += b;
        wsum[0] += c;
        pow[0] += d;
    }
    let total = |a: [f64; LANES]| a.iter().sum::<f64>();
    SweepStats { diff_sq: total(diff), old_sq: total(old), weighted: total(wsum), power: total(pow) }
}

/// Decomposes `signal`, sampled at `rate_hz`, into `params.k_modes` modes.
pub fn decompose(signal: &[f64], rate_hz: f64, params: &VmdParams) -> Result<ImfSet> {
    params.validate()?;
    let n = signal.len();
    if n < MIN_SIGNAL_LEN {
        return Err(Error::invalid(format!(
            "signal has {n} samples, at least {MIN_SIGNAL_LEN} required"
        )));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {rate_hz}")));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signal contains non-finite samples"));
    }
    if params.k_modes > n / 4 {
        return Err(Error::OverDecomposition { k_modes: params.k_modes, len: n });
    }

    // Mirror extension: reversed first half, signal, reversed second half.
    let front = n.div_ceil(2);
    let mut ext: Vec<Complex64> = Vec::with_capacity(2 * n);
    ext.extend(signal[..front].iter().rev().map(|&v| Complex64::new(v, 0.0)));
    ext.extend(signal.iter().map(|&v| Complex64::new(v, 0.0)));
    ext.extend(signal[front..].iter().rev().map(|&v| Complex64::new(v, 0.0)));
    let len = ext.len();
    dsp::fft_forward(&mut ext);

    // Non-negative frequencies below Nyquist, in cycles per sample. The
    // spectra are kept as separate real and imaginary planes.
    let half = len / 2;
    let f_re: Vec<f64> = ext[..half].iter().map(|c| c.re).collect();
    let f_im: Vec<f64> = ext[..half].iter().map(|c| c.im).collect();
    let freqs: Vec<f64> = (0..half).map(|j| j as f64 / len as f64).collect();

    let k = params.k_modes;
    let two_alpha = 2.0 * params.alpha;
    let mut omega = initial_omegas(params, len);
    let mut u_re = vec![vec![0.0; half]; k];
    let mut u_im = vec![vec![0.0; half]; k];
    let mut sum_re = vec![0.0; half];
    let mut sum_im = vec![0.0; half];
    // f̂ − λ/2, refreshed after each dual step.
    let mut g_re = f_re.clone();
    let mut g_im = f_im.clone();
    let mut lam_re = vec![0.0; half];
    let mut lam_im = vec![0.0; half];

    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        change = 0.0;
        for m in 0..k {
            let s = update_mode(
                ModeSlices {
                    re: &mut u_re[m],
                    im: &mut u_im[m],
                    sum_re: &mut sum_re,
                    sum_im: &mut sum_im,
                    g_re: &g_re,
                    g_im: &g_im,
                    freqs: &freqs,
                },
                omega[m],
                two_alpha,
            );
            if s.power > 0.0 {
                omega[m] = s.weighted / s.power;
            }
            change += if s.old_sq > 0.0 {
                s.diff_sq / s.old_sq
            } else if s.diff_sq > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        if params.tau > 0.0 {
            for j in 0..half {
                lam_re[j] += (sum_re[j] - f_re[j]) * params.tau;
                lam_im[j] += (sum_im[j] - f_im[j]) * params.tau;
                g_re[j] = f_re[j] - 0.5 * lam_re[j];
                g_im[j] = f_im[j] - 0.5 * lam_im[j];
            }
        }
        if change < params.tolerance {
            converged = true;
            break;
        }
    }

    // Back to the time domain with Hermitian symmetry, then crop the mirror.
    let mut modes: Vec<(f64, Vec<f64>)> = u_re
        .iter()
        .zip(&u_im)
        .zip(&omega)
        .map(|((re, im), &w)| {
            let mut full = vec![Complex64::new(0.0, 0.0); len];
            full[0] = Complex64::new(re[0], 0.0);
            for j in 1..half {
                full[j] = Complex64::new(re[j], im[j]);
                full[len - j] = Complex64::new(re[j], -im[j]);
            }
            dsp::fft_inverse(&mut full);
            let mode: Vec<f64> = full[front..front + n].iter().map(|c| c.re).collect();
            (w * rate_hz, mode)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut residual = signal.to_vec();
    for (_, m) in &modes {
        for (r, v) in residual.iter_mut().zip(m) {
            *r -= v;
        }
    }
    let (center_freqs_hz, modes) = modes.into_iter().unzip();
    Ok(ImfSet {
        modes,
        center_freqs_hz,
        residual,
        rate_hz,
        iterations_used: iterations,
        converged,
        final_change: change,
    })
}

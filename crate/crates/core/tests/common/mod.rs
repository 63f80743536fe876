//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Sum of unit-free sinusoids `(amplitude, freq_hz)` sampled at `rate`.
pub fn tones(parts: &[(f64, f64)], rate: f64, secs: f64) -> Vec<f64> {
    let n = (rate * secs).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            parts.iter().map(|(a, f)| a * (2.0 * PI * f * t).sin()).sum()
        })
        .collect()
}

/// Direct O(N·F) DFT magnitude at an arbitrary frequency.
pub fn dft_magnitude(x: &[f64], rate: f64, freq_hz: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let ph = 2.0 * PI * freq_hz * i as f64 / rate;
        re += v * ph.cos();
        im -= v * ph.sin();
    }
    (re * re + im * im).sqrt()
}

/// Frequency of the largest naive-DFT magnitude on a `step_hz` grid over
/// `[lo, hi]`.
pub fn dft_peak_hz(x: &[f64], rate: f64, lo: f64, hi: f64, step_hz: f64) -> f64 {
    let steps = ((hi - lo) / step_hz).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * step_hz)
        .map(|f| (f, dft_magnitude(x, rate, f)))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
}

/// Sample entropy straight from its definition: Chebyshev matches within
/// `r_factor` population standard deviations over the first `N - m`
/// template starts, self-matches excluded.
pub fn sampen_bruteforce(x: &[f64], m: usize, r_factor: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let r = r_factor * sd;
    let close = |i: usize, j: usize, len: usize| (0..len).all(|t| (x[i + t] - x[j + t]).abs() <= r);
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..n - m {
        for j in i + 1..n - m {
            if close(i, j, m) {
                b += 1;
                if close(i, j, m + 1) {
                    a += 1;
                }
            }
        }
    }
    if a == 0 {
        (b.max(1) as f64 * (n - m) as f64).ln()
    } else {
        -(a as f64 / b as f64).ln()
    }
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

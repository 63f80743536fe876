//! Small signal-processing helpers shared by the pipeline stages: FFT
//! wrappers, zero-phase biquad filtering, windowing and decimation.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT (unnormalized).
pub fn fft_forward(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse DFT, normalized by 1/N so that it inverts [`fft_forward`].
pub fn fft_inverse(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation (divides by N).
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Decimates by averaging non-overlapping blocks of `factor` samples.
/// A trailing partial block is dropped.
pub fn decimate_mean(x: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1, "decimation factor must be at least 1");
    x.chunks_exact(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect()
}

/// Second-order IIR section, transposed direct form II, normalized so a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth (Q = 1/sqrt 2) low-pass, bilinear transform with prewarping.
    pub fn lowpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let (cos, alpha) = Self::prewarp(cutoff_hz, rate_hz);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 - cos) / 2.0 / a0;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    /// Butterworth (Q = 1/sqrt 2) high-pass.
    pub fn highpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let (cos, alpha) = Self::prewarp(cutoff_hz, rate_hz);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 + cos) / 2.0 / a0;
        Biquad {
            b: [b0, -2.0 * b0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn prewarp(cutoff_hz: f64, rate_hz: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff_hz / rate_hz;
        (w0.cos(), w0.sin() / std::f64::consts::SQRT_2)
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / rate_hz);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z1 + self.a[1] * z2;
        (num / den).norm()
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Runs the section over `x`, starting from the steady state of a
    /// constant input equal to `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let y0 = self.dc_gain() * x0;
        let mut z2 = self.b[2] * x0 - self.a[1] * y0;
        let mut z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// Zero-phase forward-backward filtering through a cascade of sections.
///
/// The signal is extended by odd reflection of `pad` samples on both ends to
/// suppress start-up transients; the extension is removed before returning.
pub fn filtfilt(sections: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// One-sided magnitude spectrum of a real series, Hann-windowed and
/// zero-padded to a power of two giving a bin spacing of at most
/// `max_bin_hz`. Returns `(frequencies_hz, magnitudes)`.
pub fn padded_magnitude_spectrum(x: &[f64], rate_hz: f64, max_bin_hz: f64) -> (Vec<f64>, Vec<f64>) {
    let min_len = (rate_hz / max_bin_hz).ceil() as usize;
    let len = min_len.max(x.len()).next_power_of_two();
    let window = hann(x.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for ((b, &v), w) in buf.iter_mut().zip(x).zip(&window) {
        b.re = v * w;
    }
    fft_forward(&mut buf);
    let half = len / 2 + 1;
    let df = rate_hz / len as f64;
    let freqs = (0..half).map(|i| i as f64 * df).collect();
    let mags = buf[..half].iter().map(|c| c.norm()).collect();
    (freqs, mags)
}

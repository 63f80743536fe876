//! FMCW radar model: dechirped IF synthesis from a chest displacement trace,
//! range FFT, target bin selection and slow-time phase extraction.
//!
//! After mixing, every chirp of a target at range `R` is a complex tone at the
//! beat frequency `f_b = 2·B·R / (c·T)` whose phase across chirps is
//! `4π·R / λ`. Micro-displacements well below the range resolution `c / 2B`
//! are therefore visible only in that slow-time phase.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Upper bound on complex samples held by one cube (4 GiB of `Complex64`).
pub const MAX_CUBE_SAMPLES: usize = 1 << 28;

/// FMCW waveform and sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub fast_time_samples: usize,
    pub slow_time_rate_hz: f64,
    pub adc_rate_hz: f64,
}

impl Default for RadarConfig {
    /// A 60 GHz sensor sweeping 3.2 GHz in 50 µs, with 2000 chirps per second.
    fn default() -> Self {
        RadarConfig {
            carrier_freq_hz: 60.0e9,
            bandwidth_hz: 3.2e9,
            chirp_duration_s: 50.0e-6,
            fast_time_samples: 32,
            slow_time_rate_hz: 2000.0,
            adc_rate_hz: 640.0e3,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_duration_s", self.chirp_duration_s),
            ("slow_time_rate_hz", self.slow_time_rate_hz),
            ("adc_rate_hz", self.adc_rate_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.fast_time_samples == 0 {
            return Err(Error::invalid("fast_time_samples must be at least 1"));
        }
        // Sampling window must fit inside the chirp (small slack for rounding).
        let window = self.fast_time_samples as f64 / self.adc_rate_hz;
        if window > self.chirp_duration_s * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "fast-time window {window:e} s exceeds chirp duration {:e} s",
                self.chirp_duration_s
            )));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Frequency sweep rate B/T in Hz/s.
    pub fn chirp_slope(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration_s
    }

    pub fn beat_frequency_hz(&self, range_m: f64) -> f64 {
        2.0 * self.chirp_slope() * range_m / SPEED_OF_LIGHT
    }

    /// Range covered by one FFT bin. Equals `c / 2B` when the ADC window
    /// spans the whole chirp.
    pub fn range_bin_spacing_m(&self) -> f64 {
        let bin_hz = self.adc_rate_hz / self.fast_time_samples as f64;
        bin_hz * SPEED_OF_LIGHT / (2.0 * self.chirp_slope())
    }

    /// Fractional FFT bin index at which a target at `range_m` appears.
    pub fn range_to_bin(&self, range_m: f64) -> f64 {
        range_m / self.range_bin_spacing_m()
    }
}

/// Radial displacement of the reflecting surface, sampled once per chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementTrace {
    samples: Vec<f64>,
    rate_hz: f64,
    base_range_m: f64,
}

impl DisplacementTrace {
    pub fn new(samples: Vec<f64>, rate_hz: f64, base_range_m: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("trace rate must be positive, got {rate_hz}")));
        }
        if !(base_range_m.is_finite() && base_range_m > 0.0) {
            return Err(Error::invalid(format!("base range must be positive, got {base_range_m}")));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite() || v.abs() >= base_range_m) {
            return Err(Error::invalid(format!(
                "displacement sample {bad} is non-finite or not smaller than the base range"
            )));
        }
        Ok(DisplacementTrace { samples, rate_hz, base_range_m })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn base_range_m(&self) -> f64 {
        self.base_range_m
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Dechirped IF samples, one row per chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCube {
    data: Array2<Complex64>,
    config: RadarConfig,
}

impl IqCube {
    pub fn new(data: Array2<Complex64>, config: RadarConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.fast_time_samples {
            return Err(Error::invalid(format!(
                "cube has {} fast-time samples, config says {}",
                data.ncols(),
                config.fast_time_samples
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("cube contains non-finite samples"));
        }
        Ok(IqCube { data, config })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn chirps(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elementwise sum of two cubes with the same geometry (superposition of
    /// independent scatterers).
    pub fn superpose(&self, other: &IqCube) -> Result<IqCube> {
        if self.data.dim() != other.data.dim() || self.config != other.config {
            return Err(Error::invalid("cubes differ in shape or configuration"));
        }
        Ok(IqCube { data: &self.data + &other.data, config: self.config })
    }
}

/// Per-chirp range spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub data: Array2<Complex64>,
    pub slow_time_rate_hz: f64,
    pub bin_spacing_m: f64,
}

impl RangeProfile {
    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    /// Mean over chirps of the magnitude in each bin.
    pub fn mean_magnitudes(&self) -> Vec<f64> {
        let chirps = self.data.nrows().max(1) as f64;
        self.data
            .axis_iter(Axis(1))
            .map(|col| col.iter().map(|c| c.norm()).sum::<f64>() / chirps)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSelection {
    pub bin: usize,
    /// Strongest-bin magnitude over the all-bin mean, in dB.
    pub peak_to_mean_db: f64,
    pub low_confidence: bool,
}

/// Below this peak-to-mean ratio the selected bin is flagged.
pub const LOW_CONFIDENCE_DB: f64 = 3.0;

/// Unwrapped slow-time phase of the target bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub phase: Vec<f64>,
    pub rate_hz: f64,
    pub origin_bin: Option<usize>,
}

impl PhaseSeries {
    pub fn new(phase: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("phase rate must be positive, got {rate_hz}")));
        }
        if phase.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("phase series contains non-finite samples"));
        }
        Ok(PhaseSeries { phase, rate_hz, origin_bin: None })
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.phase.len() as f64 / self.rate_hz
    }

    /// Block-average decimation to the integer factor nearest to
    /// `rate_hz / target_rate_hz`. Series already at or below the target
    /// rate are returned unchanged.
    pub fn decimate_to(&self, target_rate_hz: f64) -> PhaseSeries {
        let factor = (self.rate_hz / target_rate_hz).round();
        if !(factor >= 2.0) {
            return self.clone();
        }
        let factor = factor as usize;
        PhaseSeries {
            phase: dsp::decimate_mean(&self.phase, factor),
            rate_hz: self.rate_hz / factor as f64,
            origin_bin: self.origin_bin,
        }
    }

    /// Converts phase back to displacement in meters.
    pub fn to_displacement(&self, wavelength_m: f64) -> Vec<f64> {
        let scale = wavelength_m / (4.0 * PI);
        self.phase.iter().map(|p| p * scale).collect()
    }
}

/// Phase change produced by a radial displacement: `4π·δR / λ`.
pub fn displacement_to_phase(delta_r_m: f64, wavelength_m: f64) -> Result<f64> {
    if !delta_r_m.is_finite() || !wavelength_m.is_finite() {
        return Err(Error::invalid("displacement and wavelength must be finite"));
    }
    if wavelength_m <= 0.0 {
        return Err(Error::invalid(format!("wavelength must be positive, got {wavelength_m}")));
    }
    Ok(4.0 * PI * delta_r_m / wavelength_m)
}

/// Synthesizes the dechirped IF cube for a single point target following
/// `trace`, with optional additive circular Gaussian noise at `noise_snr_db`
/// relative to the unit-power target tone.
pub fn synthesize_iq(
    trace: &DisplacementTrace,
    config: &RadarConfig,
    noise_snr_db: Option<f64>,
    seed: u64,
) -> Result<IqCube> {
    config.validate()?;
    let rel = (trace.rate_hz - config.slow_time_rate_hz).abs() / config.slow_time_rate_hz;
    if rel > 1e-9 {
        return Err(Error::invalid(format!(
            "trace rate {} Hz does not match slow-time rate {} Hz",
            trace.rate_hz, config.slow_time_rate_hz
        )));
    }
    let chirps = trace.len();
    let n_fast = config.fast_time_samples;
    match chirps.checked_mul(n_fast) {
        Some(total) if total <= MAX_CUBE_SAMPLES => {}
        _ => {
            return Err(Error::Capacity(format!(
                "{chirps} chirps x {n_fast} samples exceeds {MAX_CUBE_SAMPLES} samples"
            )))
        }
    }

    let wavelength = config.wavelength_m();
    let dt = 1.0 / config.adc_rate_hz;
    let mut data = Array2::<Complex64>::zeros((chirps, n_fast));
    for (mut row, &dr) in data.axis_iter_mut(Axis(0)).zip(&trace.samples) {
        let range = trace.base_range_m + dr;
        let beat = config.beat_frequency_hz(range);
        let slow_phase = 4.0 * PI * range / wavelength;
        for (n, v) in row.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, 2.0 * PI * beat * n as f64 * dt + slow_phase);
        }
    }

    if let Some(snr_db) = noise_snr_db {
        if !snr_db.is_finite() {
            return Err(Error::invalid("noise SNR must be finite"));
        }
        let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in data.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }

    IqCube::new(data, *config)
}

/// Per-chirp DFT over fast time.
pub fn range_profile(cube: &IqCube) -> Result<RangeProfile> {
    if cube.is_empty() {
        return Err(Error::invalid("range profile of an empty cube"));
    }
    let mut data = cube.data.clone();
    for mut row in data.axis_iter_mut(Axis(0)) {
        match row.as_slice_mut() {
            Some(s) => dsp::fft_forward(s),
            None => {
                let mut tmp = row.to_vec();
                dsp::fft_forward(&mut tmp);
                row.assign(&ndarray::ArrayView1::from(&tmp));
            }
        }
    }
    Ok(RangeProfile {
        data,
        slow_time_rate_hz: cube.config.slow_time_rate_hz,
        bin_spacing_m: cube.config.range_bin_spacing_m(),
    })
}

/// Picks the bin with the largest mean slow-time magnitude; ties go to the
/// lower index.
pub fn select_range_bin(profile: &RangeProfile) -> Result<BinSelection> {
    if profile.data.is_empty() {
        return Err(Error::invalid("cannot select a bin from an empty profile"));
    }
    let mags = profile.mean_magnitudes();
    let (mut bin, mut peak) = (0, mags[0]);
    for (i, &m) in mags.iter().enumerate().skip(1) {
        if m > peak {
            bin = i;
            peak = m;
        }
    }
    let avg = dsp::mean(&mags);
    let peak_to_mean_db = if avg > 0.0 { 20.0 * (peak / avg).log10() } else { 0.0 };
    Ok(BinSelection {
        bin,
        peak_to_mean_db,
        low_confidence: peak_to_mean_db < LOW_CONFIDENCE_DB,
    })
}

/// Unwraps a phase sequence by adding ±2π whenever consecutive samples jump
/// by more than π. Returns the unwrapped series and the number of
/// corrections applied.
pub fn unwrap_phase(wrapped: &[f64]) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    let mut corrections = 0;
    let mut prev: Option<f64> = None;
    for &p in wrapped {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
                corrections += 1;
            } else if d < -PI {
                offset += 2.0 * PI;
                corrections += 1;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    (out, corrections)
}

pub fn extract_unwrapped_phase(profile: &RangeProfile, bin: usize) -> Result<PhaseSeries> {
    if bin >= profile.bins() {
        return Err(Error::invalid(format!("bin {bin} out of range ({} bins)", profile.bins())));
    }
    let wrapped: Vec<f64> = profile.data.column(bin).iter().map(|c| c.arg()).collect();
    let (phase, _) = unwrap_phase(&wrapped);
    Ok(PhaseSeries {
        phase,
        rate_hz: profile.slow_time_rate_hz,
        origin_bin: Some(bin),
    })
}

/// Range FFT, bin selection and phase extraction in one call.
pub fn cube_to_phase(cube: &IqCube) -> Result<(PhaseSeries, BinSelection)> {
    let profile = range_profile(cube)?;
    let sel = select_range_bin(&profile)?;
    Ok((extract_unwrapped_phase(&profile, sel.bin)?, sel))
}

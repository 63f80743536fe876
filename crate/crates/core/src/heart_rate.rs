//! R-peak detection on the reconstructed cardiac signal and BPM estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    /// Length of the centred window used for threshold statistics.
    pub window_s: f64,
    /// Threshold is `mean + threshold_k · std` of the window.
    pub threshold_k: f64,
    /// Minimum spacing between accepted peaks.
    pub refractory_s: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig { window_s: 2.0, threshold_k: 0.8, refractory_s: 0.5 }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::invalid(format!("window_s must be positive, got {}", self.window_s)));
        }
        if !(self.refractory_s.is_finite() && self.refractory_s > 0.0) {
            return Err(Error::invalid(format!("refractory_s must be positive, got {}", self.refractory_s)));
        }
        if !self.threshold_k.is_finite() {
            return Err(Error::invalid("threshold_k must be finite"));
        }
        Ok(())
    }

    pub fn window_samples(&self, rate_hz: f64) -> usize {
        ((self.window_s * rate_hz).round() as usize).max(1)
    }

    /// Smallest allowed gap between peaks, in samples.
    pub fn refractory_samples(&self, rate_hz: f64) -> usize {
        (self.refractory_s * rate_hz).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpmEstimate {
    pub bpm: f64,
    pub peak_indices: Vec<usize>,
    pub method_tag: String,
    /// 60 / median inter-beat interval, when at least two peaks exist.
    pub ibi_median_bpm: Option<f64>,
    pub low_confidence: bool,
    pub empty_band: bool,
}

impl BpmEstimate {
    pub fn with_method(mut self, tag: impl Into<String>) -> Self {
        self.method_tag = tag.into();
        self
    }
}

fn window_threshold(x: &[f64], center: usize, half: usize, k: f64) -> f64 {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(x.len());
    let w = &x[lo..hi];
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    mean + k * var.sqrt()
}

/// Detects peaks with a sliding mean + k·std threshold and a refractory
/// period. Within the refractory period the earlier peak is kept unless a
/// strictly taller one follows, which replaces it.
///
/// A candidate must rise from its left neighbour and not be exceeded by its
/// right neighbour, so a flat top counts once, at its first sample.
pub fn detect_r_peaks(cms: &[f64], rate_hz: f64, cfg: &PeakConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {rate_hz}")));
    }
    let window = cfg.window_samples(rate_hz);
    if cms.len() < window {
        return Err(Error::invalid(format!(
            "series of {} samples is shorter than the {window}-sample window",
            cms.len()
        )));
    }
    let half = window / 2;
    let min_gap = cfg.refractory_samples(rate_hz);

    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..cms.len().saturating_sub(1) {
        let v = cms[i];
        if !(cms[i - 1] < v && v >= cms[i + 1]) {
            continue;
        }
        if v <= window_threshold(cms, i, half, cfg.threshold_k) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < min_gap => {
                if v > cms[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    Ok(peaks)
}

/// BPM as the peak count per minute of analysed signal.
pub fn bpm_from_peaks(peaks: &[usize], rate_hz: f64, duration_s: f64) -> Result<BpmEstimate> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
    }
    let ibi_median_bpm = if peaks.len() >= 2 && rate_hz > 0.0 {
        let mut gaps: Vec<usize> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_unstable();
        let mid = gaps.len() / 2;
        let median = if gaps.len() % 2 == 0 {
            (gaps[mid - 1] + gaps[mid]) as f64 / 2.0
        } else {
            gaps[mid] as f64
        };
        Some(60.0 * rate_hz / median)
    } else {
        None
    };
    Ok(BpmEstimate {
        bpm: peaks.len() as f64 * 60.0 / duration_s,
        peak_indices: peaks.to_vec(),
        method_tag: "peaks".into(),
        ibi_median_bpm,
        low_confidence: false,
        empty_band: false,
    })
}

/// Peak detection followed by count-based BPM over the whole series.
pub fn estimate_bpm(cms: &[f64], rate_hz: f64, cfg: &PeakConfig) -> Result<BpmEstimate> {
    let peaks = detect_r_peaks(cms, rate_hz, cfg)?;
    bpm_from_peaks(&peaks, rate_hz, cms.len() as f64 / rate_hz)
}

//! Comparison methods: band-pass + FFT peak picking, VMD with fixed
//! parameters, and VMD tuned by a genetic algorithm.

mod ga;

pub use ga::{ga_optimize, GaConfig, MUTATION_SIGMA};

use crate::dsp::{self, Biquad};
use crate::error::{Error, Result};
use crate::heart_rate::{estimate_bpm, BpmEstimate, PeakConfig};
use crate::nrbo::Bounds;
use crate::objective::{CmsObjective, VmdFit};
use crate::reconstruction::{cardiac_signal, BandSpec};
use crate::signal_model::PhaseSeries;
use crate::vmd::{self, VmdParams};

/// Shortest series accepted by [`bpf_fft_estimate`].
pub const BPF_MIN_DURATION_S: f64 = 10.0;
/// Upper bound on the zero-padded spectrum bin width.
pub const BPF_MAX_BIN_HZ: f64 = 0.01;
/// In-band peaks weaker than this multiple of the in-band mean are flagged.
pub const BPF_MIN_PEAK_RATIO: f64 = 3.0;

/// Zero-phase band-pass: a second-order Butterworth high-pass at the lower
/// edge cascaded with a second-order low-pass at the upper edge, run forward
/// and backward.
pub fn bandpass(x: &[f64], rate_hz: f64, band: &BandSpec) -> Vec<f64> {
    let sections = [Biquad::highpass(band.low_hz, rate_hz), Biquad::lowpass(band.high_hz, rate_hz)];
    let pad = ((3.0 * rate_hz / band.low_hz).round() as usize).min(x.len().saturating_sub(1));
    let centered: Vec<f64> = {
        let m = dsp::mean(x);
        x.iter().map(|v| v - m).collect()
    };
    dsp::filtfilt(&sections, &centered, pad)
}

/// Band-pass filter, then report 60 × the strongest in-band spectral peak.
pub fn bpf_fft_estimate(phase: &PhaseSeries, band: &BandSpec) -> Result<BpmEstimate> {
    band.validate()?;
    if phase.duration_s() < BPF_MIN_DURATION_S {
        return Err(Error::invalid(format!(
            "{:.2} s of signal is below the {BPF_MIN_DURATION_S} s needed for spectral resolution",
            phase.duration_s()
        )));
    }
    let filtered = bandpass(&phase.phase, phase.rate_hz, band);
    let (freqs, mags) = dsp::padded_magnitude_spectrum(&filtered, phase.rate_hz, BPF_MAX_BIN_HZ);

    let in_band: Vec<usize> = (0..freqs.len()).filter(|&i| band.contains(freqs[i])).collect();
    let Some(&first) = in_band.first() else {
        return Err(Error::invalid("band contains no spectral bins"));
    };
    let mut peak = first;
    for &i in &in_band {
        if mags[i] > mags[peak] {
            peak = i;
        }
    }
    let in_band_mean = in_band.iter().map(|&i| mags[i]).sum::<f64>() / in_band.len() as f64;
    // A maximum within one Hann main-lobe half-width of a band edge, with
    // something stronger just outside that edge, is the skirt of an
    // out-of-band component.
    let lobe_hz = 2.0 / phase.duration_s();
    let stronger_outside = |lo: f64, hi: f64| {
        (0..freqs.len()).any(|i| freqs[i] >= lo && freqs[i] <= hi && !band.contains(freqs[i]) && mags[i] > mags[peak])
    };
    let edge_leak = (freqs[peak] - band.low_hz <= lobe_hz && stronger_outside(band.low_hz - lobe_hz, band.low_hz))
        || (band.high_hz - freqs[peak] <= lobe_hz && stronger_outside(band.high_hz, band.high_hz + lobe_hz));
    let weak = !(mags[peak] >= BPF_MIN_PEAK_RATIO * in_band_mean);

    Ok(BpmEstimate {
        bpm: 60.0 * freqs[peak],
        peak_indices: Vec::new(),
        method_tag: "bpf".into(),
        ibi_median_bpm: None,
        low_confidence: edge_leak || weak,
        empty_band: false,
    })
}

/// Peak-count BPM of a cardiac reconstruction.
pub fn estimate_from_fit(fit: &VmdFit, rate_hz: f64, peaks: &PeakConfig, tag: &str) -> Result<BpmEstimate> {
    let mut est = estimate_bpm(&fit.cms.signal, rate_hz, peaks)?.with_method(tag);
    est.empty_band = fit.cms.empty_band;
    est.low_confidence = fit.cms.empty_band;
    Ok(est)
}

/// VMD with fixed parameters, cardiac-band reconstruction, peak counting.
pub fn fixed_vmd_estimate(
    phase: &PhaseSeries,
    params: &VmdParams,
    band: &BandSpec,
    peaks: &PeakConfig,
) -> Result<BpmEstimate> {
    let imfs = vmd::decompose(&phase.phase, phase.rate_hz, params)?;
    let cms = cardiac_signal(&imfs, band);
    let mut est = estimate_bpm(&cms.signal, phase.rate_hz, peaks)?.with_method("vmd");
    est.empty_band = cms.empty_band;
    est.low_confidence = cms.empty_band;
    Ok(est)
}

/// Same search space and fitness as the NRBO fit, driven by [`ga_optimize`].
pub fn ga_vmd_fit(phase: &PhaseSeries, bounds: &Bounds, ga: &GaConfig, objective: &CmsObjective) -> Result<VmdFit> {
    objective.check_bounds(phase, bounds)?;
    let result = ga_optimize(objective.memoized(phase), bounds, ga)?;
    objective.finish(phase, result)
}

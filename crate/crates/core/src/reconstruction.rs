//! Cardiac-band mode selection and signal reconstruction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vmd::ImfSet;

/// Frequency band in Hz, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Default for BandSpec {
    /// 0.5–2 Hz, i.e. 30–120 beats per minute.
    fn default() -> Self {
        BandSpec { low_hz: 0.5, high_hz: 2.0 }
    }
}

impl BandSpec {
    pub fn new(low_hz: f64, high_hz: f64) -> Result<Self> {
        let band = BandSpec { low_hz, high_hz };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "band must satisfy 0 < low < high, got [{}, {}]",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        self.low_hz <= freq_hz && freq_hz <= self.high_hz
    }
}

/// A reconstructed cardiac signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub signal: Vec<f64>,
    /// Set when no mode fell inside the band; `signal` is then all zeros.
    pub empty_band: bool,
}

/// Indices of modes whose centre frequency lies in `band`, by ascending
/// frequency.
pub fn select_cardiac_modes(imfs: &ImfSet, band: &BandSpec) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..imfs.center_freqs_hz.len())
        .filter(|&i| band.contains(imfs.center_freqs_hz[i]))
        .collect();
    idx.sort_by(|&a, &b| imfs.center_freqs_hz[a].total_cmp(&imfs.center_freqs_hz[b]).then(a.cmp(&b)));
    idx
}

/// Elementwise sum of the selected modes.
pub fn reconstruct(imfs: &ImfSet, indices: &[usize]) -> Result<Reconstruction> {
    let mut signal = vec![0.0; imfs.len()];
    for &i in indices {
        let mode = imfs
            .modes
            .get(i)
            .ok_or_else(|| Error::invalid(format!("mode index {i} out of range ({} modes)", imfs.k_modes())))?;
        for (s, v) in signal.iter_mut().zip(mode) {
            *s += v;
        }
    }
    Ok(Reconstruction { signal, empty_band: indices.is_empty() })
}

/// Selects the in-band modes and sums them.
pub fn cardiac_signal(imfs: &ImfSet, band: &BandSpec) -> Reconstruction {
    let idx = select_cardiac_modes(imfs, band);
    reconstruct(imfs, &idx).expect("selected indices are always in range")
}

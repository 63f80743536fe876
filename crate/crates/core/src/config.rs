use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::GaConfig;
use crate::error::{Error, Result};
use crate::heart_rate::PeakConfig;
use crate::nrbo::{Bounds, NrboConfig};
use crate::objective::{CmsObjective, SampEnConfig};
use crate::reconstruction::BandSpec;
use crate::vmd::VmdParams;

/// Every tunable of the estimation pipeline. Unknown keys are rejected when
/// parsed from JSON; missing keys take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Phase series are block-averaged down to about this rate.
    pub target_rate_hz: f64,
    pub band: BandSpec,
    pub peaks: PeakConfig,
    pub sampen: SampEnConfig,
    /// Fixed-parameter VMD settings; the optimizers reuse everything but
    /// `k_modes` and `alpha`.
    pub vmd: VmdParams,
    pub bounds: Bounds,
    pub nrbo: NrboConfig,
    pub ga: GaConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            target_rate_hz: 40.0,
            band: BandSpec::default(),
            peaks: PeakConfig::default(),
            sampen: SampEnConfig::default(),
            vmd: VmdParams::default(),
            bounds: Bounds::default(),
            nrbo: NrboConfig::default(),
            ga: GaConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_rate_hz.is_finite() && self.target_rate_hz > 0.0) {
            return Err(Error::invalid("target_rate_hz must be positive"));
        }
        self.band.validate()?;
        self.peaks.validate()?;
        self.sampen.validate()?;
        self.vmd.validate()?;
        self.bounds.validate()?;
        self.nrbo.validate()?;
        self.ga.validate()
    }

    pub fn objective(&self) -> CmsObjective {
        CmsObjective { sampen: self.sampen, band: self.band, vmd: self.vmd }
    }
}

/// The four heart-rate estimators compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NrboVmd,
    GaVmd,
    Vmd,
    Bpf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NrboVmd, Method::GaVmd, Method::Vmd, Method::Bpf];

    pub fn tag(self) -> &'static str {
        match self {
            Method::NrboVmd => "nrbo-vmd",
            Method::GaVmd => "ga-vmd",
            Method::Vmd => "vmd",
            Method::Bpf => "bpf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}` (expected nrbo-vmd, ga-vmd, vmd or bpf)")))
    }
}

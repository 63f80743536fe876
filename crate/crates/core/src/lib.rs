//! Non-contact heartbeat estimation from FMCW radar phase.
//!
//! The pipeline extracts the slow-time phase of the strongest range bin,
//! decomposes it with variational mode decomposition whose mode count and
//! bandwidth penalty are tuned by a Newton-Raphson-based population
//! optimizer (fitness: sample entropy of the cardiac-band reconstruction),
//! and counts R-peaks in the reconstructed cardiac signal. Band-pass + FFT,
//! fixed-parameter VMD and GA-tuned VMD are provided for comparison.

pub mod baselines;
pub mod config;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod heart_rate;
pub mod io;
pub mod nrbo;
pub mod objective;
pub mod reconstruction;
pub mod signal_model;
pub mod vmd;

pub use baselines::{bpf_fft_estimate, fixed_vmd_estimate, ga_optimize, ga_vmd_fit, GaConfig};
pub use config::{Method, PipelineConfig};
pub use error::{Error, Result};
pub use evaluation::{
    accuracy_percent, rmse, run_cohort, synth_cohort, CohortSpec, EvalReport, SubjectRecord, SubjectSource,
};
pub use heart_rate::{bpm_from_peaks, detect_r_peaks, BpmEstimate, PeakConfig};
pub use nrbo::{nrbo_vmd_fit, optimize, Bounds, Candidate, NrboConfig, OptResult};
pub use objective::{sample_entropy, CmsObjective, SampEnConfig, VmdFit};
pub use reconstruction::{reconstruct, select_cardiac_modes, BandSpec, Reconstruction};
pub use signal_model::{
    displacement_to_phase, extract_unwrapped_phase, range_profile, select_range_bin, synthesize_iq,
    DisplacementTrace, IqCube, PhaseSeries, RadarConfig, RangeProfile,
};
pub use vmd::{decompose, ImfSet, InitMode, VmdParams};

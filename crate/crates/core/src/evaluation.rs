//! Cohort evaluation: synthetic cohort generation, per-subject estimation
//! with each method, and the RMSE / accuracy aggregates.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bpf_fft_estimate, estimate_from_fit, fixed_vmd_estimate, ga_vmd_fit};
use crate::config::{Method, PipelineConfig};
use crate::dsp;
use crate::error::{Error, Result};
use crate::heart_rate::BpmEstimate;
use crate::io;
use crate::nrbo::nrbo_vmd_fit;
use crate::objective::VmdFit;
use crate::signal_model::{cube_to_phase, synthesize_iq, DisplacementTrace, PhaseSeries, RadarConfig};

/// Declared in every report: the accuracy metric is an interpretation.
pub const ACCURACY_DEFINITION: &str =
    "accuracy_pct = mean over subjects of max(0, 1 - |est - ref| / ref) * 100 (relative agreement; interpretation, not a published formula)";

/// Root-mean-square difference between estimates and references.
pub fn rmse(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() || est.is_empty() {
        return Err(Error::invalid(format!(
            "rmse needs equal non-zero lengths, got {} and {}",
            est.len(),
            reference.len()
        )));
    }
    let sum: f64 = est.iter().zip(reference).map(|(e, r)| (e - r) * (e - r)).sum();
    Ok((sum / est.len() as f64).sqrt())
}

/// Mean relative agreement in percent, each subject floored at zero.
pub fn accuracy_percent(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() || est.is_empty() {
        return Err(Error::invalid(format!(
            "accuracy needs equal non-zero lengths, got {} and {}",
            est.len(),
            reference.len()
        )));
    }
    if let Some(bad) = reference.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::invalid(format!("reference BPM must be positive, got {bad}")));
    }
    let sum: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (1.0 - (e - r).abs() / r).max(0.0))
        .sum();
    Ok(100.0 * sum / est.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubjectSource {
    Phase(PhaseSeries),
    PhaseCsv(PathBuf),
    Iq { bin: PathBuf, sidecar: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub source: SubjectSource,
    pub reference_bpm: f64,
}

impl SubjectRecord {
    /// Loads (and for IQ captures, extracts) the raw phase series.
    pub fn load_phase(&self) -> Result<PhaseSeries> {
        let phase = match &self.source {
            SubjectSource::Phase(p) => p.clone(),
            SubjectSource::PhaseCsv(path) => {
                let (values, rate) = io::read_series_csv_file(path)
                    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                PhaseSeries::new(values, rate)?
            }
            SubjectSource::Iq { bin, sidecar } => {
                let cube = io::read_iq_files(bin, sidecar)
                    .map_err(|e| Error::Data(format!("{}: {e}", bin.display())))?;
                cube_to_phase(&cube)?.0
            }
        };
        if phase.is_empty() {
            return Err(Error::Data(format!("subject {} has an empty phase series", self.id)));
        }
        Ok(phase)
    }
}

/// Decimates towards the processing rate and removes the mean.
pub fn prepare_phase(phase: &PhaseSeries, target_rate_hz: f64) -> PhaseSeries {
    let mut p = phase.decimate_to(target_rate_hz);
    let m = dsp::mean(&p.phase);
    p.phase.iter_mut().for_each(|v| *v -= m);
    p
}

/// Result of one method on one prepared phase series.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub estimate: BpmEstimate,
    /// Present for the VMD-based methods.
    pub fit: Option<VmdFit>,
}

/// Runs `method` on an already prepared phase series. Optimizer seeds are
/// taken from `seed`.
pub fn estimate(phase: &PhaseSeries, method: Method, cfg: &PipelineConfig, seed: u64) -> Result<MethodOutcome> {
    let objective = cfg.objective();
    match method {
        Method::NrboVmd => {
            let nrbo = crate::nrbo::NrboConfig { seed, ..cfg.nrbo };
            let fit = nrbo_vmd_fit(phase, &cfg.bounds, &nrbo, &objective)?;
            let estimate = estimate_from_fit(&fit, phase.rate_hz, &cfg.peaks, method.tag())?;
            Ok(MethodOutcome { estimate, fit: Some(fit) })
        }
        Method::GaVmd => {
            let ga = crate::baselines::GaConfig { seed, ..cfg.ga };
            let fit = ga_vmd_fit(phase, &cfg.bounds, &ga, &objective)?;
            let estimate = estimate_from_fit(&fit, phase.rate_hz, &cfg.peaks, method.tag())?;
            Ok(MethodOutcome { estimate, fit: Some(fit) })
        }
        Method::Vmd => {
            let estimate = fixed_vmd_estimate(phase, &cfg.vmd, &cfg.band, &cfg.peaks)?;
            Ok(MethodOutcome { estimate, fit: None })
        }
        Method::Bpf => Ok(MethodOutcome { estimate: bpf_fft_estimate(phase, &cfg.band)?, fit: None }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub method: Method,
    pub est_bpm: Option<f64>,
    pub ref_bpm: f64,
    pub abs_error: Option<f64>,
    pub low_confidence: bool,
    /// Set when the row is incomplete.
    pub error: Option<String>,
}

impl ReportRow {
    pub fn is_complete(&self) -> bool {
        self.est_bpm.is_some() && self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub rmse_bpm: Option<f64>,
    pub accuracy_pct: Option<f64>,
    pub complete: usize,
    pub incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy_definition: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<MethodAggregate>,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<ReportRow>, methods: &[Method], seed: u64) -> Self {
        let aggregates = aggregate(&rows, methods);
        EvalReport { accuracy_definition: ACCURACY_DEFINITION.into(), seed, rows, aggregates }
    }

    pub fn aggregate_for(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Ids of subjects with at least one incomplete row.
    pub fn flagged_subjects(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.rows.iter().filter(|r| !r.is_complete()).map(|r| r.id.as_str()).collect();
        ids.dedup();
        ids
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned plain-text rendering: aggregates first, then every row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.accuracy_definition);
        let _ = writeln!(out, "{:<10} {:>10} {:>13} {:>9} {:>11}", "method", "rmse_bpm", "accuracy_pct", "complete", "incomplete");
        for a in &self.aggregates {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                out,
                "{:<10} {:>10} {:>13} {:>9} {:>11}",
                a.method.tag(),
                fmt(a.rmse_bpm),
                fmt(a.accuracy_pct),
                a.complete,
                a.incomplete
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<12} {:<10} {:>9} {:>9} {:>9}  note", "id", "method", "est_bpm", "ref_bpm", "abs_err");
        for r in &self.rows {
            let est = r.est_bpm.map_or("-".to_string(), |v| format!("{v:.2}"));
            let err = r.abs_error.map_or("-".to_string(), |v| format!("{v:.2}"));
            let note = match (&r.error, r.low_confidence) {
                (Some(e), _) => e.clone(),
                (None, true) => "low-confidence".to_string(),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{:<12} {:<10} {:>9} {:>9.2} {:>9}  {}",
                r.id,
                r.method.tag(),
                est,
                r.ref_bpm,
                err,
                note
            );
        }
        out
    }

    /// Absolute-error table, one row per subject and one column per method.
    pub fn write_abs_error_csv<W: Write>(&self, w: W) -> Result<()> {
        let methods: Vec<Method> = self.aggregates.iter().map(|a| a.method).collect();
        let mut by_id: BTreeMap<&str, BTreeMap<Method, Option<f64>>> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !by_id.contains_key(r.id.as_str()) {
                order.push(&r.id);
            }
            by_id.entry(&r.id).or_default().insert(r.method, r.abs_error);
        }
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(methods.iter().map(|m| m.tag().to_string()));
        wtr.write_record(&header)?;
        for id in order {
            let mut row = vec![id.to_string()];
            for m in &methods {
                let v = by_id[id].get(m).copied().flatten();
                row.push(v.map_or(String::new(), |v| format!("{v}")));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Aggregates per method from complete rows only.
pub fn aggregate(rows: &[ReportRow], methods: &[Method]) -> Vec<MethodAggregate> {
    methods
        .iter()
        .map(|&method| {
            let (complete, incomplete): (Vec<&ReportRow>, Vec<&ReportRow>) =
                rows.iter().filter(|r| r.method == method).partition(|r| r.is_complete());
            let est: Vec<f64> = complete.iter().map(|r| r.est_bpm.unwrap()).collect();
            let reference: Vec<f64> = complete.iter().map(|r| r.ref_bpm).collect();
            MethodAggregate {
                method,
                rmse_bpm: rmse(&est, &reference).ok(),
                accuracy_pct: accuracy_percent(&est, &reference).ok(),
                complete: complete.len(),
                incomplete: incomplete.len(),
            }
        })
        .collect()
}

/// Seed used for subject `index` of a cohort run with base seed `seed`.
pub fn subject_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

fn evaluate_subject(index: usize, rec: &SubjectRecord, methods: &[Method], seed: u64, cfg: &PipelineConfig) -> Vec<ReportRow> {
    let failed = |method: Method, msg: String| ReportRow {
        id: rec.id.clone(),
        method,
        est_bpm: None,
        ref_bpm: rec.reference_bpm,
        abs_error: None,
        low_confidence: false,
        error: Some(msg),
    };
    let loaded = if rec.reference_bpm > 0.0 && rec.reference_bpm < 300.0 {
        rec.load_phase()
    } else {
        Err(Error::Data(format!("reference BPM {} outside (0, 300)", rec.reference_bpm)))
    };
    let phase = match loaded {
        Ok(p) => prepare_phase(&p, cfg.target_rate_hz),
        Err(e) => return methods.iter().map(|&m| failed(m, e.to_string())).collect(),
    };
    methods
        .iter()
        .map(|&method| match estimate(&phase, method, cfg, subject_seed(seed, index)) {
            Ok(out) => ReportRow {
                id: rec.id.clone(),
                method,
                est_bpm: Some(out.estimate.bpm),
                ref_bpm: rec.reference_bpm,
                abs_error: Some((out.estimate.bpm - rec.reference_bpm).abs()),
                low_confidence: out.estimate.low_confidence,
                error: None,
            },
            Err(e) => failed(method, e.to_string()),
        })
        .collect()
}

/// Evaluates every subject with every requested method. Subjects run
/// concurrently; rows are assembled in record order. Per-subject failures
/// produce incomplete rows instead of aborting the run.
pub fn run_cohort(records: &[SubjectRecord], methods: &[Method], seed: u64, cfg: &PipelineConfig) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::invalid("cohort is empty"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    cfg.validate()?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let rows: Vec<ReportRow> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| evaluate_subject(i, rec, &methods, seed, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(EvalReport::from_rows(rows, &methods, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq_bin: Option<PathBuf>,
    /// Defaults to `iq_bin` with a `.json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq_sidecar: Option<PathBuf>,
    pub ref_bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subjects: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    /// Resolves paths relative to `base_dir` and builds the subject records.
    pub fn records(&self, base_dir: &Path) -> Result<Vec<SubjectRecord>> {
        self.subjects
            .iter()
            .map(|e| {
                let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                let source = match (&e.phase_csv, &e.iq_bin) {
                    (Some(csv), None) => SubjectSource::PhaseCsv(resolve(csv)),
                    (None, Some(bin)) => {
                        let bin = resolve(bin);
                        let sidecar = e.iq_sidecar.as_ref().map(&resolve).unwrap_or_else(|| io::sidecar_path(&bin));
                        SubjectSource::Iq { bin, sidecar }
                    }
                    _ => {
                        return Err(Error::Data(format!(
                            "subject {}: exactly one of phase_csv or iq_bin is required",
                            e.id
                        )))
                    }
                };
                Ok(SubjectRecord { id: e.id.clone(), source, reference_bpm: e.ref_bpm })
            })
            .collect()
    }
}

/// Parameter ranges for the synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub cardiac_hz: [f64; 2],
    pub cardiac_amp_m: [f64; 2],
    pub respiration_hz: [f64; 2],
    pub respiration_amp_m: [f64; 2],
    pub snr_db: [f64; 2],
    pub duration_s: f64,
    pub base_range_m: f64,
    pub radar: RadarConfig,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            cardiac_hz: [0.8, 1.8],
            cardiac_amp_m: [0.2e-3, 0.5e-3],
            respiration_hz: [0.15, 0.4],
            respiration_amp_m: [1.0e-3, 12.0e-3],
            snr_db: [5.0, 20.0],
            duration_s: 60.0,
            base_range_m: 0.2,
            radar: RadarConfig::default(),
        }
    }
}

/// Drawn parameters and trace of one synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub id: String,
    pub cardiac_hz: f64,
    pub cardiac_amp_m: f64,
    pub respiration_hz: f64,
    pub respiration_amp_m: f64,
    pub snr_db: f64,
    pub noise_seed: u64,
    pub trace: DisplacementTrace,
}

impl SyntheticSubject {
    pub fn reference_bpm(&self) -> f64 {
        60.0 * self.cardiac_hz
    }
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    range[0] + (range[1] - range[0]) * rng.random::<f64>()
}

/// Draws subject parameters and builds their sinusoidal cardiac plus
/// respiration displacement traces at the radar's slow-time rate.
pub fn synth_subjects(n_subjects: usize, seed: u64, spec: &CohortSpec) -> Result<Vec<SyntheticSubject>> {
    spec.radar.validate()?;
    let rate = spec.radar.slow_time_rate_hz;
    let n = (spec.duration_s * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_subjects)
        .map(|i| {
            let cardiac_hz = draw(&mut rng, spec.cardiac_hz);
            let cardiac_amp_m = draw(&mut rng, spec.cardiac_amp_m);
            let respiration_hz = draw(&mut rng, spec.respiration_hz);
            let respiration_amp_m = draw(&mut rng, spec.respiration_amp_m);
            let snr_db = draw(&mut rng, spec.snr_db);
            let cardiac_phase = 2.0 * PI * rng.random::<f64>();
            let respiration_phase = 2.0 * PI * rng.random::<f64>();
            let noise_seed: u64 = rng.random();
            let samples = (0..n)
                .map(|j| {
                    let t = j as f64 / rate;
                    cardiac_amp_m * (2.0 * PI * cardiac_hz * t + cardiac_phase).sin()
                        + respiration_amp_m * (2.0 * PI * respiration_hz * t + respiration_phase).sin()
                })
                .collect();
            Ok(SyntheticSubject {
                id: format!("S{:02}", i + 1),
                cardiac_hz,
                cardiac_amp_m,
                respiration_hz,
                respiration_amp_m,
                snr_db,
                noise_seed,
                trace: DisplacementTrace::new(samples, rate, spec.base_range_m)?,
            })
        })
        .collect()
}

/// Synthesizes a cohort and pushes every subject through the radar model
/// (IQ synthesis, range FFT, bin selection, phase extraction).
pub fn synth_cohort(n_subjects: usize, seed: u64, spec: &CohortSpec) -> Result<Vec<SubjectRecord>> {
    if n_subjects == 0 {
        return Err(Error::invalid("cohort needs at least one subject"));
    }
    synth_subjects(n_subjects, seed, spec)?
        .into_iter()
        .map(|s| {
            let cube = synthesize_iq(&s.trace, &spec.radar, Some(s.snr_db), s.noise_seed)?;
            let (phase, _) = cube_to_phase(&cube)?;
            Ok(SubjectRecord {
                reference_bpm: s.reference_bpm(),
                id: s.id,
                source: SubjectSource::Phase(phase),
            })
        })
        .collect()
}

/// Magnitude spectra of each method's cardiac reconstruction for one
/// subject: `freq_hz` followed by one column per VMD-based method.
pub fn write_reconstruction_spectra<W: Write>(
    w: W,
    phase: &PhaseSeries,
    cfg: &PipelineConfig,
    seed: u64,
    max_freq_hz: f64,
) -> Result<()> {
    let methods = [Method::NrboVmd, Method::GaVmd, Method::Vmd];
    let mut columns = Vec::new();
    for m in methods {
        let signal = match m {
            Method::Vmd => {
                let imfs = crate::vmd::decompose(&phase.phase, phase.rate_hz, &cfg.vmd)?;
                crate::reconstruction::cardiac_signal(&imfs, &cfg.band).signal
            }
            _ => estimate(phase, m, cfg, seed)?.fit.expect("VMD methods return a fit").cms.signal,
        };
        columns.push(dsp::padded_magnitude_spectrum(&signal, phase.rate_hz, crate::baselines::BPF_MAX_BIN_HZ));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["freq_hz".to_string()];
    header.extend(methods.iter().map(|m| m.tag().to_string()));
    wtr.write_record(&header)?;
    let (freqs, _) = &columns[0];
    for (i, f) in freqs.iter().enumerate().take_while(|(_, f)| **f <= max_freq_hz) {
        let mut row = vec![format!("{f}")];
        row.extend(columns.iter().map(|(_, mags)| format!("{}", mags[i])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

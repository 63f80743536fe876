//! `vitalvmd` command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vitalvmd::evaluation::{self, CohortSpec, Manifest, ManifestEntry, SubjectSource};
use vitalvmd::signal_model::cube_to_phase;
use vitalvmd::{io, synthesize_iq, Error, Method, PipelineConfig, SubjectRecord};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "vitalvmd", version, about = "Heart-rate estimation from FMCW radar phase")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort and its manifest.
    Synth(SynthArgs),
    /// Convert an IQ capture into a phase CSV.
    Extract(ExtractArgs),
    /// Estimate heart rate for one subject with one method.
    Estimate(EstimateArgs),
    /// Evaluate every subject of a manifest with the requested methods.
    Eval(EvalArgs),
    /// Write the absolute-error table and reconstruction spectra as CSV.
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 18)]
    subjects: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    snr_min: f64,
    #[arg(long, default_value_t = 20.0)]
    snr_max: f64,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Write raw IQ captures with JSON sidecars instead of phase CSVs.
    #[arg(long)]
    iq: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    iq: PathBuf,
    /// Defaults to the capture path with a `.json` extension.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pipeline configuration JSON; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Phase series CSV (`t_s,value`).
    #[arg(long, conflicts_with = "iq", required_unless_present = "iq")]
    input: Option<PathBuf>,
    /// IQ capture; the sidecar is found next to it.
    #[arg(long)]
    iq: Option<PathBuf>,
    #[arg(long, default_value = "nrbo-vmd")]
    method: Method,
    #[command(flatten)]
    common: CommonArgs,
    /// Write the modes as CSV plus a `.json` header (VMD methods only).
    #[arg(long)]
    imfs_out: Option<PathBuf>,
    #[arg(long)]
    peaks_out: Option<PathBuf>,
    /// Optimizer trace as JSON lines (optimized methods only).
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated subset of nrbo-vmd, ga-vmd, vmd, bpf.
    #[arg(long, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
    methods: Vec<Method>,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Subject whose reconstruction spectra are written; defaults to the first.
    #[arg(long)]
    subject: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    max_freq: f64,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Estimate(a) => estimate(a),
        Command::Eval(a) => eval(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::InvalidArgument(_)) => EXIT_USAGE,
        Some(err) if err.is_data_error() => EXIT_DATA,
        Some(_) => EXIT_NUMERICAL,
        None if e.chain().any(|c| c.is::<std::io::Error>()) => EXIT_DATA,
        None => EXIT_USAGE,
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from).with_context(|| format!("reading {}", p.display()))?;
            // A malformed config is a usage problem, not bad subject data.
            let cfg = PipelineConfig::from_json(&text).map_err(|e| match e {
                Error::Json(j) => Error::InvalidArgument(format!("config {}: {j}", p.display())),
                other => other,
            })?;
            Ok(cfg)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).map_err(Error::from).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    if a.subjects == 0 {
        return Err(Error::InvalidArgument("--subjects must be at least 1".into()).into());
    }
    if !(a.snr_min <= a.snr_max) || !(a.duration > 0.0) {
        return Err(Error::InvalidArgument("need snr-min <= snr-max and a positive duration".into()).into());
    }
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let spec = CohortSpec { snr_db: [a.snr_min, a.snr_max], duration_s: a.duration, ..Default::default() };
    let mut entries = Vec::new();
    for s in evaluation::synth_subjects(a.subjects, a.seed, &spec)? {
        let cube = synthesize_iq(&s.trace, &spec.radar, Some(s.snr_db), s.noise_seed)?;
        let mut entry =
            ManifestEntry { id: s.id.clone(), phase_csv: None, iq_bin: None, iq_sidecar: None, ref_bpm: s.reference_bpm() };
        if a.iq {
            let bin = PathBuf::from(format!("{}.bin", s.id));
            io::write_iq_files(&a.out.join(&bin), &io::sidecar_path(&a.out.join(&bin)), &cube)?;
            entry.iq_bin = Some(bin);
        } else {
            let (phase, _) = cube_to_phase(&cube)?;
            let csv = PathBuf::from(format!("{}.csv", s.id));
            io::write_series_csv_file(&a.out.join(&csv), &phase.phase, phase.rate_hz)?;
            entry.phase_csv = Some(csv);
        }
        entries.push(entry);
    }
    let manifest = Manifest { subjects: entries };
    serde_json::to_writer_pretty(create(&a.out.join("manifest.json"))?, &manifest).map_err(Error::from)?;
    println!("wrote {} subjects to {}", manifest.subjects.len(), a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> anyhow::Result<()> {
    let sidecar = a.sidecar.unwrap_or_else(|| io::sidecar_path(&a.iq));
    let cube = io::read_iq_files(&a.iq, &sidecar)?;
    let (phase, sel) = cube_to_phase(&cube)?;
    io::write_series_csv_file(&a.out, &phase.phase, phase.rate_hz)?;
    println!(
        "{}",
        json!({
            "bin": sel.bin,
            "peak_to_mean_db": sel.peak_to_mean_db,
            "low_confidence": sel.low_confidence,
            "samples": phase.len(),
            "rate_hz": phase.rate_hz,
        })
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let source = match (&a.input, &a.iq) {
        (Some(csv), _) => SubjectSource::PhaseCsv(csv.clone()),
        (None, Some(bin)) => SubjectSource::Iq { bin: bin.clone(), sidecar: io::sidecar_path(bin) },
        (None, None) => return Err(anyhow!(Error::InvalidArgument("one of --input or --iq is required".into()))),
    };
    let record = SubjectRecord { id: "input".into(), source, reference_bpm: 1.0 };
    let phase = evaluation::prepare_phase(&record.load_phase()?, cfg.target_rate_hz);
    let out = evaluation::estimate(&phase, a.method, &cfg, a.common.seed)?;

    if let Some(p) = &a.peaks_out {
        let signal = match &out.fit {
            Some(fit) => fit.cms.signal.clone(),
            None if a.method == Method::Vmd => {
                let imfs = vitalvmd::decompose(&phase.phase, phase.rate_hz, &cfg.vmd)?;
                vitalvmd::reconstruction::cardiac_signal(&imfs, &cfg.band).signal
            }
            None => vitalvmd::baselines::bandpass(&phase.phase, phase.rate_hz, &cfg.band),
        };
        io::write_peaks_csv(create(p)?, &signal, phase.rate_hz, &out.estimate.peak_indices)?;
    }
    if let Some(p) = &a.imfs_out {
        let (imfs, params) = match &out.fit {
            Some(fit) => (fit.imfs.clone(), cfg.objective().params(fit.best.k_modes, fit.best.alpha)),
            None if a.method == Method::Vmd => (vitalvmd::decompose(&phase.phase, phase.rate_hz, &cfg.vmd)?, cfg.vmd),
            None => return Err(Error::InvalidArgument("--imfs-out needs a VMD-based method".into()).into()),
        };
        io::write_imfs_csv(create(p)?, &imfs)?;
        io::write_imf_header(create(&p.with_extension("json"))?, &imfs, &params)?;
    }
    if let Some(p) = &a.trace_out {
        let fit = out.fit.as_ref().ok_or_else(|| Error::InvalidArgument("--trace-out needs nrbo-vmd or ga-vmd".into()))?;
        io::write_trace_jsonl(create(p)?, &fit.search.trace)?;
    }

    let mut report = serde_json::to_value(&out.estimate).map_err(Error::from)?;
    if let Some(fit) = &out.fit {
        report["best_k"] = json!(fit.best.k_modes);
        report["best_alpha"] = json!(fit.best.alpha);
        report["best_fitness"] = json!(fit.best.fitness);
        report["evaluations"] = json!(fit.search.evaluations);
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn load_records(manifest: &Path) -> anyhow::Result<Vec<SubjectRecord>> {
    let m = Manifest::read(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    Ok(m.records(base)?)
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let records = load_records(&a.manifest)?;
    let report = evaluation::run_cohort(&records, &a.methods, a.common.seed, &cfg)?;
    if let Some(p) = &a.json_out {
        fs::write(p, report.to_json_pretty()?).map_err(Error::from)?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn plotdata(a: PlotArgs) -> anyhow::Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let records = load_records(&a.manifest)?;
    if records.is_empty() {
        return Err(Error::Data("manifest lists no subjects".into()).into());
    }
    let (index, record) = match &a.subject {
        Some(id) => records
            .iter()
            .enumerate()
            .find(|(_, r)| &r.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no subject `{id}` in manifest")))?,
        None => (0, &records[0]),
    };
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let report = evaluation::run_cohort(&records, &Method::ALL, a.common.seed, &cfg)?;
    report.write_abs_error_csv(create(&a.out.join("abs_error.csv"))?)?;

    let phase = evaluation::prepare_phase(&record.load_phase()?, cfg.target_rate_hz);
    let path = a.out.join(format!("spectra_{}.csv", record.id));
    evaluation::write_reconstruction_spectra(
        create(&path)?,
        &phase,
        &cfg,
        evaluation::subject_seed(a.common.seed, index),
        a.max_freq,
    )?;
    println!("wrote {} and {}", a.out.join("abs_error.csv").display(), path.display());
    Ok(())
}

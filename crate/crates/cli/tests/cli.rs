use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vitalvmd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small search budgets at a low processing rate keep the runs short.
fn quick_config(dir: &Path) -> String {
    let p = dir.join("quick.json");
    fs::write(
        &p,
        r#"{"target_rate_hz": 25, "nrbo": {"population_n": 4, "max_iterations": 1},
            "ga": {"population_n": 4, "generations": 1}}"#,
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", d, "--subjects", "2", "--duration", "12", "--seed", "3"];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["estimate", "--input", "x.csv", "--method", "fft"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["synth", "--out", d, "--subjects", "0"])), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"no_such_key": 1}"#).unwrap();
    synth(dir.path(), &[]);
    let csv = dir.path().join("S01.csv");
    let out = run(&["estimate", "--input", csv.to_str().unwrap(), "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&run(&["estimate", "--input", missing.to_str().unwrap(), "--method", "bpf"])), 2);
    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&run(&["estimate", "--input", garbage.to_str().unwrap(), "--method", "bpf"])), 2);
    let manifest = dir.path().join("manifest.json");
    fs::write(&manifest, "{not json").unwrap();
    assert_eq!(code(&run(&["eval", "--manifest", manifest.to_str().unwrap()])), 2);
}

#[test]
fn synth_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    assert!(dir.path().join("S01.csv").exists() && dir.path().join("S02.csv").exists());
    let cfg = quick_config(dir.path());
    let manifest = dir.path().join("manifest.json");
    let json = dir.path().join("report.json");
    let out = run(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        &cfg,
        "--json-out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for m in ["nrbo-vmd", "ga-vmd", "vmd", "bpf"] {
        assert!(text.contains(m), "{text}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 8);
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 4);

    let out = run(&["eval", "--manifest", manifest.to_str().unwrap(), "--methods", "bpf,vmd", "--config", &cfg]);
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("nrbo-vmd"));
}

#[test]
fn estimate_writes_requested_exports() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = quick_config(dir.path());
    let csv = dir.path().join("S01.csv");
    let imfs = dir.path().join("imfs.csv");
    let peaks = dir.path().join("peaks.csv");
    let trace = dir.path().join("trace.jsonl");
    let out = run(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--config",
        &cfg,
        "--seed",
        "4",
        "--imfs-out",
        imfs.to_str().unwrap(),
        "--peaks-out",
        peaks.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["method_tag"], "nrbo-vmd");
    assert!(v["bpm"].as_f64().unwrap() >= 0.0);
    assert!(v["evaluations"].as_u64().unwrap() <= 4 * 4);
    assert!(fs::read_to_string(&imfs).unwrap().starts_with("t_s,mode_1"));
    assert!(dir.path().join("imfs.json").exists());
    assert!(fs::read_to_string(&peaks).unwrap().starts_with("index,t_s,amplitude"));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 2);

    // Same seed, same answer.
    let again = run(&["estimate", "--input", csv.to_str().unwrap(), "--config", &cfg, "--seed", "4"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&again)).unwrap();
    assert_eq!(v["bpm"], w["bpm"]);
    assert_eq!(v["best_k"], w["best_k"]);

    let out = run(&["estimate", "--input", csv.to_str().unwrap(), "--method", "bpf", "--trace-out", "t.jsonl"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn iq_capture_extract_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--iq", "--snr-min", "30", "--snr-max", "30"]);
    let bin = dir.path().join("S01.bin");
    assert!(dir.path().join("S01.json").exists());
    let phase = dir.path().join("phase.csv");
    let out = run(&["extract", "--iq", bin.to_str().unwrap(), "--out", phase.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["samples"], 24000);
    assert_eq!(v["rate_hz"], 2000.0);

    let a = run(&["estimate", "--iq", bin.to_str().unwrap(), "--method", "bpf"]);
    let b = run(&["estimate", "--input", phase.to_str().unwrap(), "--method", "bpf"]);
    assert_eq!(code(&a), 0);
    let (a, b): (serde_json::Value, serde_json::Value) =
        (serde_json::from_str(&stdout(&a)).unwrap(), serde_json::from_str(&stdout(&b)).unwrap());
    assert!((a["bpm"].as_f64().unwrap() - b["bpm"].as_f64().unwrap()).abs() < 1e-6);

    let truncated = dir.path().join("S02.bin");
    let bytes = fs::read(&truncated).unwrap();
    fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(code(&run(&["extract", "--iq", truncated.to_str().unwrap(), "--out", phase.to_str().unwrap()])), 2);
}

#[test]
fn plotdata_writes_error_table_and_spectra() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = quick_config(dir.path());
    let plots = dir.path().join("plots");
    let manifest = dir.path().join("manifest.json");
    let out = run(&[
        "plotdata",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
        "--subject",
        "S02",
        "--config",
        &cfg,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let spectra = fs::read_to_string(plots.join("spectra_S02.csv")).unwrap();
    assert!(spectra.starts_with("freq_hz,nrbo-vmd,ga-vmd,vmd"));
    assert!(fs::read_to_string(plots.join("abs_error.csv")).unwrap().lines().count() > 1);
    let out = run(&["plotdata", "--manifest", manifest.to_str().unwrap(), "--out", plots.to_str().unwrap(), "--subject", "S99"]);
    assert_eq!(code(&out), 1);
}

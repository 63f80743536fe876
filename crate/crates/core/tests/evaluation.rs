mod common;

use std::fs;

use proptest::prelude::*;
use vitalvmd::evaluation::{synth_subjects, Manifest, ManifestEntry};
use vitalvmd::signal_model::cube_to_phase;
use vitalvmd::*;

/// Cheap settings: the tests exercise the plumbing, not estimation quality.
fn quick_config() -> PipelineConfig {
    let mut cfg = PipelineConfig { target_rate_hz: 25.0, ..Default::default() };
    cfg.nrbo.population_n = 4;
    cfg.nrbo.max_iterations = 1;
    cfg.ga.population_n = 4;
    cfg.ga.generations = 1;
    cfg
}

fn short_spec() -> CohortSpec {
    CohortSpec { duration_s: 20.0, ..Default::default() }
}

const ALL: [Method; 4] = [Method::NrboVmd, Method::GaVmd, Method::Vmd, Method::Bpf];

#[test]
fn metric_examples() {
    assert_eq!(rmse(&[70.0, 80.0], &[70.0, 80.0]).unwrap(), 0.0);
    assert!((rmse(&[70.0, 80.0], &[72.0, 76.0]).unwrap() - 10f64.sqrt()).abs() < 1e-12);
    assert_eq!(rmse(&[60.0], &[66.0]).unwrap(), 6.0);
    assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    assert_eq!(accuracy_percent(&[72.0], &[72.0]).unwrap(), 100.0);
    assert_eq!(accuracy_percent(&[60.0], &[80.0]).unwrap(), 75.0);
    assert_eq!(accuracy_percent(&[200.0], &[80.0]).unwrap(), 0.0);
    assert!(matches!(accuracy_percent(&[60.0], &[0.0]), Err(Error::InvalidArgument(_))));
}

proptest! {
    #[test]
    fn two_element_metrics_match_hand_formulas(
        e0 in 0.0f64..250.0, e1 in 0.0f64..250.0, r0 in 1.0f64..250.0, r1 in 1.0f64..250.0,
    ) {
        let want_rmse = (((e0 - r0).powi(2) + (e1 - r1).powi(2)) / 2.0).sqrt();
        let a0 = (1.0 - (e0 - r0).abs() / r0).max(0.0);
        let a1 = (1.0 - (e1 - r1).abs() / r1).max(0.0);
        let got_rmse = rmse(&[e0, e1], &[r0, r1]).unwrap();
        let got_acc = accuracy_percent(&[e0, e1], &[r0, r1]).unwrap();
        prop_assert!((got_rmse - want_rmse).abs() <= 1e-12 * want_rmse.max(1.0));
        prop_assert!((got_acc - (a0 + a1) * 50.0).abs() <= 1e-10);
        prop_assert!((0.0..=100.0).contains(&got_acc));
    }
}

#[test]
fn synthetic_cohort_ranges_and_determinism() {
    let subjects = synth_subjects(18, 1, &CohortSpec::default()).unwrap();
    assert_eq!(subjects.len(), 18);
    for s in &subjects {
        assert!((48.0..=108.0).contains(&s.reference_bpm()));
        assert!((0.2e-3..=0.5e-3).contains(&s.cardiac_amp_m));
        assert!((1e-3..=12e-3).contains(&s.respiration_amp_m));
    }
    let a = synth_cohort(2, 9, &short_spec()).unwrap();
    let b = synth_cohort(2, 9, &short_spec()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn near_noiseless_subject_bpf_within_one_beat() {
    let spec = CohortSpec { snr_db: [40.0, 40.0], ..Default::default() };
    let rec = &synth_cohort(1, 4, &spec).unwrap()[0];
    let phase = evaluation::prepare_phase(&rec.load_phase().unwrap(), 100.0);
    let est = bpf_fft_estimate(&phase, &BandSpec::default()).unwrap();
    assert!((est.bpm - rec.reference_bpm).abs() <= 1.0, "{} vs {}", est.bpm, rec.reference_bpm);
}

#[test]
fn full_cohort_cardinality_and_self_consistency() {
    let recs = synth_cohort(18, 1, &short_spec()).unwrap();
    let report = run_cohort(&recs, &ALL, 1, &quick_config()).unwrap();
    assert_eq!(report.rows.len(), 18 * 4);
    assert_eq!(report.aggregates.len(), 4);
    for m in ALL {
        let rows: Vec<_> = report.rows_for(m).collect();
        assert_eq!(rows.len(), 18);
        let complete: Vec<_> = rows.iter().filter(|r| r.is_complete()).collect();
        let est: Vec<f64> = complete.iter().map(|r| r.est_bpm.unwrap()).collect();
        let refs: Vec<f64> = complete.iter().map(|r| r.ref_bpm).collect();
        let agg = report.aggregate_for(m).unwrap();
        assert_eq!(agg.complete, complete.len());
        assert_eq!(agg.incomplete, rows.len() - complete.len());
        assert_eq!(agg.rmse_bpm, Some(rmse(&est, &refs).unwrap()));
        assert_eq!(agg.accuracy_pct, Some(accuracy_percent(&est, &refs).unwrap()));
        for r in complete {
            assert_eq!(r.abs_error, Some((r.est_bpm.unwrap() - r.ref_bpm).abs()));
        }
    }
    let text = report.to_text();
    assert!(text.contains("accuracy_pct"));
    let json: EvalReport = serde_json::from_str(&report.to_json_pretty().unwrap()).unwrap();
    assert_eq!(json, report);
}

#[test]
fn run_cohort_is_deterministic() {
    let recs = synth_cohort(3, 2, &short_spec()).unwrap();
    let a = run_cohort(&recs, &ALL, 7, &quick_config()).unwrap();
    let b = run_cohort(&recs, &ALL, 7, &quick_config()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_method_aggregates_only_that_method() {
    let recs = synth_cohort(2, 2, &short_spec()).unwrap();
    let report = run_cohort(&recs, &[Method::Vmd], 1, &quick_config()).unwrap();
    assert_eq!(report.aggregates.len(), 1);
    assert_eq!(report.aggregates[0].method, Method::Vmd);
    assert!(report.rows.iter().all(|r| r.method == Method::Vmd));
}

#[test]
fn corrupt_file_yields_one_flagged_subject() {
    let dir = tempfile::tempdir().unwrap();
    let subjects = synth_subjects(18, 5, &short_spec()).unwrap();
    let mut entries = Vec::new();
    for (i, s) in subjects.iter().enumerate() {
        let name = format!("{}.csv", s.id);
        if i == 6 {
            fs::write(dir.path().join(&name), "t_s,value\n0,1\n0.01,not-a-number\n").unwrap();
        } else {
            let phase = displacement_to_phase(1.0, RadarConfig::default().wavelength_m()).unwrap();
            let values: Vec<f64> = s.trace.samples().iter().map(|d| d * phase).collect();
            let p = PhaseSeries::new(values, s.trace.rate_hz()).unwrap().decimate_to(100.0);
            io::write_series_csv_file(&dir.path().join(&name), &p.phase, p.rate_hz).unwrap();
        }
        entries.push(ManifestEntry {
            id: s.id.clone(),
            phase_csv: Some(name.into()),
            iq_bin: None,
            iq_sidecar: None,
            ref_bpm: s.reference_bpm(),
        });
    }
    let manifest = Manifest { subjects: entries };
    let path = dir.path().join("manifest.json");
    fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();

    let recs = Manifest::read(&path).unwrap().records(dir.path()).unwrap();
    let report = run_cohort(&recs, &[Method::Bpf], 1, &quick_config()).unwrap();
    assert_eq!(report.flagged_subjects(), vec!["S07"]);
    let agg = report.aggregate_for(Method::Bpf).unwrap();
    assert_eq!((agg.complete, agg.incomplete), (17, 1));
}

#[test]
fn out_of_range_reference_is_flagged() {
    let mut recs = synth_cohort(2, 3, &short_spec()).unwrap();
    recs[1].reference_bpm = 0.0;
    let report = run_cohort(&recs, &[Method::Bpf], 1, &quick_config()).unwrap();
    assert_eq!(report.flagged_subjects(), vec!["S02"]);
}

#[test]
fn iq_capture_round_trips_through_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CohortSpec { duration_s: 12.0, snr_db: [30.0, 30.0], ..Default::default() };
    let s = &synth_subjects(1, 8, &spec).unwrap()[0];
    let cube = synthesize_iq(&s.trace, &spec.radar, Some(s.snr_db), s.noise_seed).unwrap();
    let bin = dir.path().join("S01.bin");
    io::write_iq_files(&bin, &io::sidecar_path(&bin), &cube).unwrap();
    let manifest = Manifest {
        subjects: vec![ManifestEntry {
            id: "S01".into(),
            phase_csv: None,
            iq_bin: Some("S01.bin".into()),
            iq_sidecar: None,
            ref_bpm: s.reference_bpm(),
        }],
    };
    let recs = manifest.records(dir.path()).unwrap();
    let from_file = recs[0].load_phase().unwrap();
    let direct = cube_to_phase(&cube).unwrap().0;
    assert_eq!(from_file.len(), direct.len());
    // 16-bit quantization perturbs the phase only slightly.
    let diff: Vec<f64> = from_file.phase.iter().zip(&direct.phase).map(|(a, b)| a - b).collect();
    assert!(common::rms(&diff) < 1e-2 * common::rms(&direct.phase).max(1e-3));
}

#[test]
fn manifest_requires_exactly_one_source() {
    let m: Manifest = serde_json::from_str(r#"{"subjects":[{"id":"a","ref_bpm":70}]}"#).unwrap();
    assert!(matches!(m.records(std::path::Path::new(".")), Err(Error::Data(_))));
    assert!(serde_json::from_str::<Manifest>(r#"{"subjects":[],"extra":1}"#).is_err());
}

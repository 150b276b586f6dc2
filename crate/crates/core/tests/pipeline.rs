use blocker_core::bench::{enroll_cohort, subjects, verification_sample, Arm, ExperimentConfig, NoiseModel};
use blocker_core::quantizer::{regenerate_key, HelperData};
use blocker_core::sigproc::{
    beat_features, detect_r_peaks, load_signal, recording_features, save_signal, PipelineConfig,
};
use blocker_core::synthecg::{add_noise, generate_ecg, McSharryParams, NoiseKind, NoiseSpec};

#[test]
fn detector_finds_one_peak_per_beat() {
    for hr in [50.0, 60.0, 80.0, 100.0] {
        let params = McSharryParams {
            hr_bpm: hr,
            ..McSharryParams::default()
        };
        let signal = generate_ecg(&params, 20.0, 1).unwrap();
        let peaks = detect_r_peaks(&signal).unwrap();
        let expected = hr / 3.0;
        assert!(
            (peaks.len() as f64 - expected).abs() <= 2.0,
            "{hr} bpm: {} peaks, expected about {expected}",
            peaks.len()
        );
        let rr = 60.0 / hr * params.fs;
        for w in peaks.windows(2) {
            let gap = (w[1] - w[0]) as f64;
            assert!((gap - rr).abs() < 0.15 * rr, "{hr} bpm: R-R gap {gap}, expected {rr}");
        }
    }
}

#[test]
fn moderate_noise_keeps_peaks_and_features() {
    let params = McSharryParams::default();
    let clean = generate_ecg(&params, 10.0, 2).unwrap();
    let noisy = add_noise(
        &clean,
        &NoiseSpec {
            kind: NoiseKind::Mixed,
            snr_db: 20.0,
            seed: 3,
        },
    )
    .unwrap();
    assert_eq!(detect_r_peaks(&clean).unwrap().len(), detect_r_peaks(&noisy).unwrap().len());
    let config = PipelineConfig::default();
    let a = recording_features(&clean, &config).unwrap().unwrap();
    let b = recording_features(&noisy, &config).unwrap().unwrap();
    let rms = (a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.dim() as f64).sqrt();
    assert!(rms < 0.2, "feature RMS change {rms}");
    assert_eq!(beat_features(&clean, &config).unwrap()[0].dim(), config.feature_dim(params.fs));
}

#[test]
fn signal_files_round_trip() {
    let signal = generate_ecg(&McSharryParams::default(), 3.0, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    save_signal(&signal, &path).unwrap();
    let back = load_signal(&path).unwrap();
    assert_eq!(back.fs(), signal.fs());
    assert_eq!(back.samples(), signal.samples());
}

#[test]
fn stored_helper_regenerates_from_a_fresh_recording() {
    let mut cfg = ExperimentConfig::default();
    cfg.population.n = 8;
    cfg.na_model.recordings = 4;
    let subs = subjects(&cfg).unwrap();
    let cohort = enroll_cohort(&cfg, &subs, Arm::NaIomba, &NoiseModel::from_config(&cfg)).unwrap();
    let mut exact = 0;
    let mut total = 0;
    for m in &cohort.members {
        let Some(e) = &m.enrolled else { continue };
        let helper = HelperData::from_json(&e.helper.to_json().unwrap()).unwrap();
        assert_eq!(helper, e.helper);
        let sample = verification_sample(&cfg, &m.subject.params, &cohort.pipeline, None, 77)
            .unwrap()
            .unwrap();
        total += 1;
        exact += usize::from(regenerate_key(&sample, &helper).unwrap() == e.key);
    }
    assert!(total >= 6);
    assert_eq!(exact, total, "clean recordings must regenerate the enrolled key");
}

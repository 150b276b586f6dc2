use std::sync::OnceLock;

use blocker_core::bench::{
    enroll_cohort, enrollment_recording, quant_artifacts, record, subjects, Arm, Cohort,
    ExperimentConfig, NoiseModel,
};
use blocker_core::bits::Bits;
use blocker_core::locknet::sample_multiplier;
use blocker_core::protocol::{
    key_digest, scan_for_bits, Designer, DesignerDb, Device, ProtocolConfig, QuantArtifacts,
    SessionTranscript, SCAN_WINDOW_BITS,
};
use blocker_core::pufsim::{DeviceId, Digest};
use blocker_core::quantizer::enroll_subject;
use blocker_core::sigproc::beat_features;
use blocker_core::Error;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.population.n = 8;
    cfg.na_model.recordings = 4;
    cfg
}

struct Fixture {
    cfg: ExperimentConfig,
    cohort: Cohort,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(Fixture::new)
}

impl Fixture {
    fn new() -> Self {
        let cfg = small_config();
        let subs = subjects(&cfg).unwrap();
        let cohort = enroll_cohort(&cfg, &subs, Arm::NaIomba, &NoiseModel::from_config(&cfg)).unwrap();
        Fixture { cfg, cohort }
    }

    fn artifacts(&self, member: usize) -> QuantArtifacts {
        quant_artifacts(&self.cfg, &self.cohort, &self.cohort.members[member]).unwrap()
    }

    fn device_config(&self) -> ProtocolConfig {
        self.cfg.protocol.device.clone()
    }
}

fn device(cfg: &ProtocolConfig, name: &str, seed: u64) -> Device {
    Device::manufacture(DeviceId::from(name), cfg.clone(), seed).unwrap()
}

/// Enrolls, claims and customizes one device for `member`.
fn provisioned(fx: &Fixture, member: usize, designer: &mut Designer, name: &str, seed: u64) -> (Device, SessionTranscript) {
    let mut t = SessionTranscript::default();
    let mut dev = device(&fx.device_config(), name, seed);
    designer.hardware_enroll(&mut dev, &mut t, seed + 1).unwrap();
    let subject = &fx.cohort.members[member].subject;
    let rec = enrollment_recording(&fx.cfg, subject).unwrap();
    let digest = dev.ownership_claim(&[rec], &fx.artifacts(member), &mut t, seed + 2).unwrap();
    let fw = designer.firmware_customize(dev.id(), &digest, &mut t, seed + 3).unwrap();
    dev.install_firmware(fw).unwrap();
    (dev, t)
}

fn clean_readings(fx: &Fixture, member: usize, n: usize) -> Vec<blocker_core::sigproc::RawSignal> {
    let params = &fx.cohort.members[member].subject.params;
    (0..n)
        .map(|i| record(params, fx.cfg.regeneration.duration_s, None, 900 + i as u64).unwrap())
        .collect()
}

fn input_bits(a: u64, b: u64) -> Bits {
    let mut x = Bits::from_uint(a, 4);
    x.extend_from(&Bits::from_uint(b, 4));
    x
}

#[test]
fn clean_owner_unlocks_and_power_cycle_relocks() {
    let fx = fixture();
    let app = sample_multiplier();
    let mut designer = Designer::new(fx.device_config(), app.clone()).unwrap();
    let (mut dev, mut t) = provisioned(fx, 0, &mut designer, "dev-a", 10);
    assert!(!dev.crp_port_enabled());

    let n = fx.cfg.protocol.device.ecc_n;
    let out = dev.authenticate(&clean_readings(fx, 0, n), &app, &mut t, 5).unwrap();
    assert!(out.unlocked);
    assert_eq!(out.functional_match, 1.0);

    let inputs = input_bits(13, 11);
    assert_eq!(dev.run(&inputs).unwrap(), app.evaluate(&Bits::new(), &inputs).unwrap());

    dev.power_cycle();
    assert!(!dev.is_unlocked());
    assert!(matches!(dev.run(&inputs), Err(Error::Protocol(_))));
    t.check_channel_minimality().unwrap();
}

#[test]
fn impostor_stays_locked() {
    let fx = fixture();
    let app = sample_multiplier();
    let mut designer = Designer::new(fx.device_config(), app.clone()).unwrap();
    let (mut dev, mut t) = provisioned(fx, 0, &mut designer, "dev-a", 20);
    let n = fx.cfg.protocol.device.ecc_n;
    for other in 1..4 {
        let out = dev.authenticate(&clean_readings(fx, other, n), &app, &mut t, other as u64).unwrap();
        assert!(!out.unlocked, "subject {other} unlocked the device");
        assert!(out.functional_match < 1.0);
    }
}

#[test]
fn same_biometric_gives_unrelated_keys_across_devices() {
    let fx = fixture();
    // Fewer initial CRPs keep 40 enrollments quick; the designer still
    // doubles them until the model clears its accuracy threshold.
    let config = ProtocolConfig {
        initial_crps: 1000,
        ..fx.device_config()
    };
    let mut designer = Designer::new(config.clone(), sample_multiplier()).unwrap();
    let digest = Digest::of(b"one owner, many devices");
    let mut t = SessionTranscript::default();
    let mut keys = Vec::new();
    for i in 0..40u64 {
        let mut dev = device(&config, &format!("dev-{i:02}"), 1000 + i);
        designer.hardware_enroll(&mut dev, &mut t, 2000 + i).unwrap();
        keys.push(designer.predicted_obs_key(dev.id(), &digest).unwrap());
    }
    let pairs: Vec<f64> = keys
        .chunks(2)
        .map(|p| p[0].hamming(&p[1]).unwrap() as f64 / p[0].len() as f64)
        .collect();
    assert_eq!(pairs.len(), 20);
    let mean = pairs.iter().sum::<f64>() / pairs.len() as f64;
    assert!((0.45..=0.55).contains(&mean), "mean inter-device distance {mean}");
}

#[test]
fn same_digest_gives_same_key() {
    let fx = fixture();
    let mut designer = Designer::new(fx.device_config(), sample_multiplier()).unwrap();
    let mut dev = device(&fx.device_config(), "dev-a", 3);
    designer.hardware_enroll(&mut dev, &mut SessionTranscript::default(), 4).unwrap();
    let digest = Digest::of(b"owner");
    let a = designer.predicted_obs_key(dev.id(), &digest).unwrap();
    let b = designer.predicted_obs_key(dev.id(), &digest).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), designer.key_len());
    assert_ne!(a, designer.predicted_obs_key(dev.id(), &Digest::of(b"other")).unwrap());
}

#[test]
fn unknown_and_unclaimed_devices_are_rejected() {
    let fx = fixture();
    let app = sample_multiplier();
    let mut designer = Designer::new(fx.device_config(), app.clone()).unwrap();
    let mut t = SessionTranscript::default();
    let stranger = DeviceId::from("never-enrolled");
    assert!(matches!(
        designer.firmware_customize(&stranger, &Digest::of(b"x"), &mut t, 1),
        Err(Error::UnknownDevice(_))
    ));

    let mut dev = device(&fx.device_config(), "dev-a", 5);
    let readings = clean_readings(fx, 0, 1);
    assert!(matches!(dev.authenticate(&readings, &app, &mut t, 1), Err(Error::NotEnrolled(_))));

    designer.hardware_enroll(&mut dev, &mut t, 6).unwrap();
    let fw = designer.firmware_customize(dev.id(), &Digest::of(b"x"), &mut t, 7).unwrap();
    assert!(matches!(dev.install_firmware(fw), Err(Error::NotEnrolled(_))));
}

#[test]
fn one_time_steps_cannot_repeat() {
    let fx = fixture();
    let mut designer = Designer::new(fx.device_config(), sample_multiplier()).unwrap();
    let (mut dev, mut t) = provisioned(fx, 0, &mut designer, "dev-a", 30);
    assert!(matches!(designer.hardware_enroll(&mut dev, &mut t, 1), Err(Error::Protocol(_))));
    let rec = enrollment_recording(&fx.cfg, &fx.cohort.members[1].subject).unwrap();
    assert!(matches!(
        dev.ownership_claim(&[rec], &fx.artifacts(1), &mut t, 2),
        Err(Error::Protocol(_))
    ));
    let fw = designer.firmware_customize(dev.id(), &Digest::of(b"x"), &mut t, 3).unwrap();
    assert!(matches!(dev.install_firmware(fw), Err(Error::Protocol(_))));
}

#[test]
fn firmware_with_out_of_range_selection_is_refused() {
    let fx = fixture();
    let mut designer = Designer::new(fx.device_config(), sample_multiplier()).unwrap();
    let mut t = SessionTranscript::default();
    let mut dev = device(&fx.device_config(), "dev-a", 40);
    designer.hardware_enroll(&mut dev, &mut t, 41).unwrap();
    let rec = enrollment_recording(&fx.cfg, &fx.cohort.members[0].subject).unwrap();
    let digest = dev.ownership_claim(&[rec], &fx.artifacts(0), &mut t, 42).unwrap();
    let mut fw = designer.firmware_customize(dev.id(), &digest, &mut t, 43).unwrap();
    fw.selection[0] = fx.cfg.protocol.device.challenge_candidates as u16;
    assert!(dev.install_firmware(fw).is_err());
}

#[test]
fn stores_hold_no_key_material() {
    let fx = fixture();
    let mut designer = Designer::new(fx.device_config(), sample_multiplier()).unwrap();
    let (dev, t) = provisioned(fx, 0, &mut designer, "dev-a", 50);

    let art = fx.artifacts(0);
    let rec = enrollment_recording(&fx.cfg, &fx.cohort.members[0].subject).unwrap();
    let beats = beat_features(&rec, &art.pipeline).unwrap();
    let (bio_key, _) = enroll_subject(&beats, &art.pop, &art.config, &art.margins).unwrap();
    let obs_key = designer.predicted_obs_key(dev.id(), &key_digest(&bio_key)).unwrap();

    let stores = [
        dev.nonvolatile().to_bytes().unwrap(),
        designer.db().to_bytes().unwrap(),
        t.to_json().unwrap().into_bytes(),
    ];
    for store in &stores {
        assert_eq!(scan_for_bits(store, bio_key.bits(), SCAN_WINDOW_BITS), None);
        assert_eq!(scan_for_bits(store, &obs_key, SCAN_WINDOW_BITS), None);
    }
}

#[test]
fn designer_database_round_trips() {
    let fx = fixture();
    let mut designer = Designer::new(fx.device_config(), sample_multiplier()).unwrap();
    let mut dev = device(&fx.device_config(), "dev-a", 60);
    designer.hardware_enroll(&mut dev, &mut SessionTranscript::default(), 61).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("designer.json");
    designer.db().save(&path).unwrap();
    let loaded = DesignerDb::load(&path).unwrap();
    assert_eq!(&loaded, designer.db());

    let digest = Digest::of(b"owner");
    let restored = Designer::with_db(fx.device_config(), sample_multiplier(), loaded).unwrap();
    assert_eq!(
        restored.predicted_obs_key(dev.id(), &digest).unwrap(),
        designer.predicted_obs_key(dev.id(), &digest).unwrap()
    );
}

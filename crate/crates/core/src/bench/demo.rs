//! End-to-end protocol run over a synthetic cohort.

use log::info;
use serde::{Deserialize, Serialize};

use super::cohort::{
    enroll_cohort, enrollment_recording, record, subjects, Cohort, Member, NoiseModel, TAG_AUTH,
    TAG_DEVICE, TAG_PROTOCOL,
};
use super::config::ExperimentConfig;
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::locknet::{sample_multiplier, LutNetlist};
use crate::protocol::{
    scan_for_bits, scan_for_values, Designer, Device, ProtocolConfig, QuantArtifacts,
    SessionTranscript, SCAN_WINDOW_BITS,
};
use crate::pufsim::DeviceId;
use crate::quantizer::{enroll_subject, margin_table, BioKey};
use crate::rng::derive_seed;
use crate::sigproc::{beat_features, RawSignal};
use crate::synthecg::McSharryParams;

/// Quantization inputs for one enrolled member of a cohort.
pub fn quant_artifacts(cfg: &ExperimentConfig, cohort: &Cohort, member: &Member) -> Result<QuantArtifacts> {
    if member.sigma.is_empty() {
        return Err(Error::Enrollment(format!("{} is not enrolled", member.subject.id)));
    }
    Ok(QuantArtifacts {
        pipeline: cohort.pipeline.clone(),
        config: cfg.quantizer,
        pop: cohort.pop.clone(),
        margins: margin_table(&cfg.quantizer, &member.sigma)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerSummary {
    pub subject: String,
    pub device: String,
    pub model_accuracy: f64,
    pub bio_key_bits: usize,
    pub obs_key_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub owners: Vec<OwnerSummary>,
    pub attempts: usize,
    pub genuine_unlocks: usize,
    pub impostor_unlocks: usize,
    pub cross_device_unlocks: usize,
    pub mean_impostor_match: f64,
    pub mean_cross_device_match: f64,
    /// Attempts where the circuit ran after unlocking and refused to run
    /// after a power cycle.
    pub power_cycle_relocks: usize,
    pub crp_ports_disabled: bool,
    pub repeated_enrollment_rejected: bool,
    pub repeated_claim_rejected: bool,
    pub channel_minimal: bool,
    pub hygiene_violations: Vec<String>,
}

impl ProtocolReport {
    pub fn genuine_rate(&self) -> f64 {
        self.genuine_unlocks as f64 / self.attempts as f64
    }
}

struct Owner {
    subject: String,
    params: McSharryParams,
    index: usize,
    device: Device,
    bio_key: BioKey,
    obs_key: Bits,
    template: Vec<f64>,
}

struct Secrets<'a> {
    owners: &'a [Owner],
}

impl Secrets<'_> {
    fn scan(&self, step: &str, stores: &[(&str, Vec<u8>)], violations: &mut Vec<String>) {
        for (name, bytes) in stores {
            for o in self.owners {
                let checks = [
                    ("bio_key", scan_for_bits(bytes, o.bio_key.bits(), SCAN_WINDOW_BITS)),
                    ("obs_key", scan_for_bits(bytes, &o.obs_key, SCAN_WINDOW_BITS)),
                    ("template", scan_for_values(bytes, &o.template)),
                ];
                for (what, found) in checks {
                    if let Some(f) = found {
                        violations.push(format!(
                            "{step}: {what} of {} found in {name} ({} {:?} at byte {})",
                            o.subject, f.encoding, f.needle, f.store_offset
                        ));
                    }
                }
            }
        }
    }
}

fn stores(designer: &Designer, devices: &[&Device], transcript: &SessionTranscript) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = vec![
        ("designer db".to_string(), designer.db().to_bytes()?),
        ("transcript".to_string(), transcript.to_json()?.into_bytes()),
    ];
    for d in devices {
        out.push((format!("{} storage", d.id()), d.nonvolatile().to_bytes()?));
    }
    Ok(out)
}

fn auth_recordings(
    cfg: &ExperimentConfig,
    params: &McSharryParams,
    count: usize,
    seed: u64,
) -> Result<Vec<RawSignal>> {
    let run = &cfg.protocol;
    (0..count)
        .map(|r| {
            record(
                params,
                cfg.regeneration.duration_s,
                Some((run.noise, run.snr_db)),
                derive_seed(seed, &[r as u64]),
            )
        })
        .collect()
}

/// Enrolls `owners` devices and one spare, claims each owner device with
/// a cohort member, then runs genuine, impostor and cross-device
/// authentication rounds. Every store is scanned for key material after
/// each step. The first owner's session transcript is returned alongside.
pub fn run_protocol(cfg: &ExperimentConfig) -> Result<(ProtocolReport, SessionTranscript)> {
    cfg.validate()?;
    let run = &cfg.protocol;
    let dev_cfg: &ProtocolConfig = &run.device;
    let subjects = subjects(cfg)?;
    let model = match run.arm {
        super::cohort::Arm::NaIomba => NoiseModel::from_config(cfg),
        _ => NoiseModel::Measured,
    };
    let cohort = enroll_cohort(cfg, &subjects, run.arm, &model)?;
    let enrolled: Vec<&Member> = cohort.members.iter().filter(|m| m.enrolled.is_some()).collect();
    if enrolled.len() < run.owners + 1 {
        return Err(Error::Enrollment(format!(
            "{} subjects enrolled; the protocol run needs {}",
            enrolled.len(),
            run.owners + 1
        )));
    }
    let seed = derive_seed(cfg.seed, &[TAG_PROTOCOL]);
    let mut designer = Designer::new(dev_cfg.clone(), sample_multiplier())?;
    let reference: LutNetlist = designer.app().clone();
    let mut transcript = SessionTranscript::default();
    let mut scratch = SessionTranscript::default();
    let mut violations = Vec::new();

    let mut owners = Vec::with_capacity(run.owners);
    let mut accuracies = Vec::with_capacity(run.owners);
    let mut repeated_enrollment_rejected = true;
    let mut repeated_claim_rejected = true;
    for (i, member) in enrolled.iter().take(run.owners).enumerate() {
        let log = if i == 0 { &mut transcript } else { &mut scratch };
        let id = DeviceId(format!("dev-{i:02}"));
        let mut device = Device::manufacture(id.clone(), dev_cfg.clone(), derive_seed(seed, &[TAG_DEVICE, i as u64]))?;
        let model = designer.hardware_enroll(&mut device, log, derive_seed(seed, &[TAG_DEVICE, i as u64, 1]))?;
        accuracies.push(model.holdout_accuracy.unwrap_or(model.train_accuracy));
        repeated_enrollment_rejected &= designer.hardware_enroll(&mut device, log, 0).is_err();

        let artifacts = quant_artifacts(cfg, &cohort, member)?;
        let recording = enrollment_recording(cfg, &member.subject)?;
        let claim_seed = derive_seed(seed, &[TAG_DEVICE, i as u64, 2]);
        let digest = device.ownership_claim(std::slice::from_ref(&recording), &artifacts, log, claim_seed)?;
        repeated_claim_rejected &= device
            .ownership_claim(std::slice::from_ref(&recording), &artifacts, log, claim_seed)
            .is_err();
        let firmware = designer.firmware_customize(&id, &digest, log, derive_seed(seed, &[TAG_DEVICE, i as u64, 3]))?;
        device.install_firmware(firmware)?;

        // Independent recomputation of the secrets the stores must not hold.
        let beats = beat_features(&recording, &artifacts.pipeline)?;
        let (bio_key, _) = enroll_subject(&beats, &artifacts.pop, &artifacts.config, &artifacts.margins)?;
        let obs_key = designer.predicted_obs_key(&id, &digest)?;
        let template: Vec<f64> = beats.iter().flat_map(|b| b.values.iter().copied()).collect();
        owners.push(Owner {
            subject: member.subject.id.clone(),
            params: member.subject.params.clone(),
            index: member.subject.index,
            device,
            bio_key,
            obs_key,
            template,
        });
        let secrets = Secrets { owners: &owners };
        let devices: Vec<&Device> = owners.iter().map(|o| &o.device).collect();
        for (name, bytes) in stores(&designer, &devices, &transcript)? {
            secrets.scan(&format!("claim of dev-{i:02}"), &[(&name, bytes)], &mut violations);
        }
    }

    let spare_id = DeviceId(format!("dev-{:02}", run.owners));
    let mut spare = Device::manufacture(
        spare_id,
        dev_cfg.clone(),
        derive_seed(seed, &[TAG_DEVICE, run.owners as u64]),
    )?;
    designer.hardware_enroll(&mut spare, &mut scratch, derive_seed(seed, &[TAG_DEVICE, run.owners as u64, 1]))?;
    let crp_ports_disabled = !spare.crp_port_enabled() && owners.iter().all(|o| !o.device.crp_port_enabled());

    let impostors: Vec<&Member> = enrolled[run.owners..].to_vec();
    let readings = dev_cfg.ecc_n;
    let product_inputs: Bits = (0..8).map(|i| (0b1011_1101u8 >> i) & 1 == 1).collect();
    let product = reference.evaluate(&Bits::new(), &product_inputs)?;
    let mut genuine = 0;
    let mut impostor = 0;
    let mut cross = 0;
    let mut relocks = 0;
    let mut impostor_match = 0.0;
    let mut cross_match = 0.0;
    for t in 0..run.attempts {
        let o = t % owners.len();
        let log_first = o == 0;
        let trial_seed = derive_seed(seed, &[TAG_AUTH, t as u64]);
        let owner_recs = auth_recordings(cfg, &owners[o].params, readings, derive_seed(trial_seed, &[0]))?;

        let log = if log_first { &mut transcript } else { &mut scratch };
        let outcome = owners[o].device.authenticate(&owner_recs, &reference, log, derive_seed(trial_seed, &[1]))?;
        if outcome.unlocked {
            genuine += 1;
            let ran = owners[o].device.run(&product_inputs)? == product;
            owners[o].device.power_cycle();
            if ran && owners[o].device.run(&product_inputs).is_err() {
                relocks += 1;
            }
        }

        let imp = impostors[t % impostors.len()];
        let imp_recs = auth_recordings(cfg, &imp.subject.params, readings, derive_seed(trial_seed, &[2]))?;
        let outcome = owners[o].device.authenticate(&imp_recs, &reference, &mut scratch, derive_seed(trial_seed, &[3]))?;
        impostor += usize::from(outcome.unlocked);
        impostor_match += outcome.functional_match;
        owners[o].device.power_cycle();

        spare.load_image(owners[o].device.nonvolatile().clone());
        let outcome = spare.authenticate(&owner_recs, &reference, &mut scratch, derive_seed(trial_seed, &[4]))?;
        cross += usize::from(outcome.unlocked);
        cross_match += outcome.functional_match;
        spare.power_cycle();

        let secrets = Secrets { owners: &owners };
        let mut devices: Vec<&Device> = owners.iter().map(|o| &o.device).collect();
        devices.push(&spare);
        for (name, bytes) in stores(&designer, &devices, &transcript)? {
            secrets.scan(&format!("attempt {t}"), &[(&name, bytes)], &mut violations);
        }
        debug_assert!(owners[o].index != imp.subject.index);
    }

    let channel_minimal =
        transcript.check_channel_minimality().is_ok() && scratch.check_channel_minimality().is_ok();
    let report = ProtocolReport {
        owners: owners
            .iter()
            .zip(&accuracies)
            .map(|(o, &model_accuracy)| OwnerSummary {
                subject: o.subject.clone(),
                device: o.device.id().to_string(),
                model_accuracy,
                bio_key_bits: o.bio_key.len(),
                obs_key_bits: o.obs_key.len(),
            })
            .collect(),
        attempts: run.attempts,
        genuine_unlocks: genuine,
        impostor_unlocks: impostor,
        cross_device_unlocks: cross,
        mean_impostor_match: impostor_match / run.attempts as f64,
        mean_cross_device_match: cross_match / run.attempts as f64,
        power_cycle_relocks: relocks,
        crp_ports_disabled,
        repeated_enrollment_rejected,
        repeated_claim_rejected,
        channel_minimal,
        hygiene_violations: violations,
    };
    info!(
        "protocol: {}/{} genuine, {} impostor, {} cross-device unlocks",
        genuine, run.attempts, impostor, cross
    );
    Ok((report, transcript))
}

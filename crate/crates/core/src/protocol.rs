//! Device locking flow between the designer, a device and its owner.
//!
//! 1. Hardware enrollment: in the factory the designer reads CRPs through a
//!    dedicated port, trains a model of the device's PUF, and the port is
//!    disabled for good.
//! 2. Ownership claim: the owner's enrollment recordings are quantized on
//!    the device. Only helper data is persisted; the device sends the
//!    designer a one-way digest of the biometric key.
//! 3. Firmware customization: the designer expands the digest into PUF
//!    challenges, predicts the responses with its model, and obfuscates
//!    the application netlist under those responses.
//! 4. Authentication: a fresh recording regenerates the biometric key, the
//!    physical PUF answers the same challenges, and the bitstream only
//!    computes the right function if every key bit is right. Keys live in
//!    volatile memory and vanish on power loss.
//!
//! The digest expands into `challenge_candidates` challenges per
//! obfuscation key bit. The designer keeps the candidate its model is
//! most confident about and ships the chosen indices with the firmware.
//! The choice depends on the magnitude of the predicted delay only, so
//! the indices say nothing about the response values. The device
//! evaluates each chosen challenge `response_repetition` times and takes
//! the majority to suppress evaluation noise.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use zeroize::Zeroize;

use crate::bits::Bits;
use crate::ecc::CodeSpec;
use crate::error::{Error, Result};
use crate::locknet::{functional_match, obfuscate, LutNetlist, ObfuscatedBitstream};
use crate::pufsim::{collect_crps, expand_challenges, train_model, ArbiterPuf, DeviceId, Digest, PufModel};
use crate::quantizer::{
    attach_ecc, enroll_subject, regenerate_from_readings, BioKey, HelperData, MarginTable,
    PopulationStats, QuantConfig,
};
use crate::rng::derive_seed;
use crate::sigproc::{beat_features, recording_features, PipelineConfig, RawSignal};

pub const DB_VERSION: u32 = 1;
/// Shortest secret slices searched per encoding; shorter ones would match
/// by chance.
pub const MIN_PACKED_BITS: usize = 16;
pub const MIN_HEX_BITS: usize = 32;
pub const MIN_BINARY_BITS: usize = 8;
/// Window used when scanning stores for key material. Biometric keys have
/// long runs (neighbouring waveform samples share a sign) and the
/// repetition-expanded ECC offset triples the runs of its random pad, so
/// 32-bit windows of constant bits match by chance.
pub const SCAN_WINDOW_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_stages: usize,
    /// Evaluation noise of the physical PUF during authentication.
    pub puf_noise_sigma: f64,
    /// CRPs read at the first enrollment attempt; doubled on each retry.
    pub initial_crps: usize,
    pub enroll_attempts: usize,
    pub min_model_accuracy: f64,
    /// Candidate challenges per obfuscation key bit.
    pub challenge_candidates: usize,
    /// Repeated evaluations of each chosen challenge on the device (odd).
    pub response_repetition: usize,
    /// Repetition length of the biometric fuzzy commitment; 1 disables it.
    pub ecc_n: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_stages: 64,
            // About 1% response flips for 64-stage standard-normal delays.
            puf_noise_sigma: 0.25,
            initial_crps: 2000,
            enroll_attempts: 3,
            min_model_accuracy: 0.95,
            challenge_candidates: 8,
            response_repetition: 5,
            ecc_n: 3,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::config("PUF needs at least one stage"));
        }
        if !(self.puf_noise_sigma >= 0.0 && self.puf_noise_sigma.is_finite()) {
            return Err(Error::config("PUF noise sigma must be finite and >= 0"));
        }
        if self.initial_crps < 2 || self.enroll_attempts == 0 {
            return Err(Error::config("hardware enrollment needs CRPs and at least one attempt"));
        }
        if !(0.5..=1.0).contains(&self.min_model_accuracy) {
            return Err(Error::config("model accuracy threshold must lie in [0.5, 1]"));
        }
        if self.challenge_candidates == 0 || self.challenge_candidates > u16::MAX as usize {
            return Err(Error::config("challenge candidates must lie in 1..=65535"));
        }
        if self.response_repetition.is_multiple_of(2) {
            return Err(Error::config("response repetition must be odd"));
        }
        CodeSpec::repetition(self.ecc_n)?;
        Ok(())
    }
}

/// Everything the device needs to quantize its owner's biometric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantArtifacts {
    pub pipeline: PipelineConfig,
    pub config: QuantConfig,
    pub pop: PopulationStats,
    pub margins: MarginTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    UserDevice,
    DeviceDesigner,
    DesignerDevice,
    DeviceUser,
}

/// Message bodies. The device-to-designer variants carry PUF challenge
/// material only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// Factory CRP readout (trusted environment only).
    CrpReadout { count: usize },
    /// Seed of the owner's PUF challenges.
    ChallengeDigest { digest: Digest },
    /// Customized bitstream, identified by its SHA-256.
    Firmware { sha256: String, key_len: usize },
    /// Recordings presented to the device; contents are not logged.
    Biometric { recordings: usize },
    Unlock { unlocked: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: usize,
    pub channel: Channel,
    pub device_id: DeviceId,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub messages: Vec<Message>,
}

impl SessionTranscript {
    fn push(&mut self, channel: Channel, device_id: &DeviceId, payload: Payload) {
        let seq = self.messages.len();
        self.messages.push(Message {
            seq,
            channel,
            device_id: device_id.clone(),
            payload,
        });
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that nothing but challenge material left a device for the
    /// designer.
    pub fn check_channel_minimality(&self) -> Result<()> {
        for m in &self.messages {
            if m.channel == Channel::DeviceDesigner
                && !matches!(m.payload, Payload::ChallengeDigest { .. } | Payload::CrpReadout { .. })
            {
                return Err(Error::Protocol(format!(
                    "message {} sends {:?} to the designer",
                    m.seq, m.payload
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub device_id: DeviceId,
    pub digest: Digest,
}

/// Designer-side records: one PUF model per device and the digests
/// received for customization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerDb {
    pub version: u32,
    pub models: BTreeMap<DeviceId, PufModel>,
    pub audit: Vec<AuditEntry>,
}

impl Default for DesignerDb {
    fn default() -> Self {
        DesignerDb {
            version: DB_VERSION,
            models: BTreeMap::new(),
            audit: Vec::new(),
        }
    }
}

impl DesignerDb {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let db: DesignerDb = serde_json::from_str(&text)?;
        if db.version != DB_VERSION {
            return Err(Error::Parse(format!(
                "designer database version {} is not supported (expected {DB_VERSION})",
                db.version
            )));
        }
        Ok(db)
    }
}

pub fn key_digest(key: &BioKey) -> Digest {
    let mut material = Vec::with_capacity(4 + key.len().div_ceil(8));
    material.extend_from_slice(&(key.len() as u32).to_be_bytes());
    material.extend_from_slice(&key.bits().to_bytes());
    let digest = Digest::of(&material);
    material.zeroize();
    digest
}

/// Majority of each consecutive group of `repetition` responses.
fn vote(responses: &Bits, repetition: usize) -> Bits {
    (0..responses.len() / repetition)
        .map(|j| {
            let ones = (j * repetition..(j + 1) * repetition)
                .filter(|&i| responses.get(i))
                .count();
            2 * ones > repetition
        })
        .collect()
}

pub struct Designer {
    config: ProtocolConfig,
    app: LutNetlist,
    db: DesignerDb,
}

impl Designer {
    pub fn new(config: ProtocolConfig, app: LutNetlist) -> Result<Self> {
        config.validate()?;
        app.validate()?;
        Ok(Designer {
            config,
            app,
            db: DesignerDb::default(),
        })
    }

    pub fn with_db(config: ProtocolConfig, app: LutNetlist, db: DesignerDb) -> Result<Self> {
        let mut d = Designer::new(config, app)?;
        d.db = db;
        Ok(d)
    }

    pub fn db(&self) -> &DesignerDb {
        &self.db
    }

    pub fn app(&self) -> &LutNetlist {
        &self.app
    }

    /// Obfuscation key length: one bit per LUT with a spare input.
    pub fn key_len(&self) -> usize {
        self.app.spare_luts()
    }

    /// Trains and registers a model of the device's PUF through its factory
    /// CRP port, then disables the port. Retries with twice the CRPs while
    /// held-out accuracy stays below the threshold.
    pub fn hardware_enroll(
        &mut self,
        device: &mut Device,
        transcript: &mut SessionTranscript,
        seed: u64,
    ) -> Result<&PufModel> {
        if self.db.models.contains_key(device.id()) {
            return Err(Error::Protocol(format!("{} is already enrolled", device.id())));
        }
        let mut count = self.config.initial_crps;
        let mut last = None;
        for attempt in 0..self.config.enroll_attempts {
            let crps = device.read_crps(count, derive_seed(seed, &[attempt as u64]))?;
            transcript.push(Channel::DeviceDesigner, device.id(), Payload::CrpReadout { count });
            let model = train_model(&crps)?;
            let accuracy = model.holdout_accuracy.unwrap_or(model.train_accuracy);
            debug!("{}: attempt {attempt}, {count} CRPs, held-out accuracy {accuracy:.4}", device.id());
            if accuracy >= self.config.min_model_accuracy {
                device.disable_crp_port();
                info!("{}: PUF model registered ({accuracy:.4})", device.id());
                return Ok(self.db.models.entry(device.id().clone()).or_insert(model));
            }
            last = Some(accuracy);
            count *= 2;
        }
        device.disable_crp_port();
        Err(Error::Enrollment(format!(
            "{}: model accuracy {:.4} below {} after {} attempts",
            device.id(),
            last.unwrap_or(0.0),
            self.config.min_model_accuracy,
            self.config.enroll_attempts
        )))
    }

    /// Picks the most confident candidate challenge for each key bit and
    /// returns the chosen indices with the predicted obfuscation key.
    pub fn plan_challenges(&self, device_id: &DeviceId, digest: &Digest) -> Result<(Vec<u16>, Bits)> {
        let model = self
            .db
            .models
            .get(device_id)
            .ok_or_else(|| Error::UnknownDevice(device_id.to_string()))?;
        let per_bit = self.config.challenge_candidates;
        let challenges = expand_challenges(digest, self.key_len() * per_bit, self.config.n_stages)?;
        let mut selection = Vec::with_capacity(self.key_len());
        let mut key = Bits::new();
        for group in challenges.chunks(per_bit) {
            let delays = group
                .iter()
                .map(|c| model.predicted_delay(c))
                .collect::<Result<Vec<f64>>>()?;
            let (best, delay) = delays
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one candidate");
            selection.push(best as u16);
            key.push(*delay > 0.0);
        }
        Ok((selection, key))
    }

    /// The obfuscation key the designer's model predicts for a digest.
    pub fn predicted_obs_key(&self, device_id: &DeviceId, digest: &Digest) -> Result<Bits> {
        Ok(self.plan_challenges(device_id, digest)?.1)
    }

    /// Builds the owner-specific bitstream for a claimed device.
    pub fn firmware_customize(
        &mut self,
        device_id: &DeviceId,
        digest: &Digest,
        transcript: &mut SessionTranscript,
        seed: u64,
    ) -> Result<Firmware> {
        let (selection, mut obs_key) = self.plan_challenges(device_id, digest)?;
        let bitstream = obfuscate(&self.app, &obs_key, seed);
        obs_key.zeroize();
        let bitstream = bitstream?;
        self.db.audit.push(AuditEntry {
            device_id: device_id.clone(),
            digest: *digest,
        });
        let sha256 = hex::encode(Sha256::digest(bitstream.to_json()?.as_bytes()));
        transcript.push(
            Channel::DesignerDevice,
            device_id,
            Payload::Firmware {
                sha256,
                key_len: bitstream.key_len,
            },
        );
        Ok(Firmware { bitstream, selection })
    }
}

/// Customized firmware: the locked bitstream plus the chosen candidate
/// index for every key bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firmware {
    pub bitstream: ObfuscatedBitstream,
    pub selection: Vec<u16>,
}

impl Firmware {
    pub fn validate(&self, candidates: usize) -> Result<()> {
        self.bitstream.validate()?;
        if self.selection.len() != self.bitstream.key_len {
            return Err(Error::SizeMismatch {
                what: "challenge selection",
                expected: self.bitstream.key_len,
                actual: self.selection.len(),
            });
        }
        if let Some(bad) = self.selection.iter().find(|&&i| i as usize >= candidates) {
            return Err(Error::Parse(format!("challenge index {bad} beyond {candidates} candidates")));
        }
        Ok(())
    }
}

/// Persistent device contents: helper data and the installed bitstream.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NonVolatile {
    pub pipeline: Option<PipelineConfig>,
    pub helper: Option<HelperData>,
    pub firmware: Option<Firmware>,
}

impl NonVolatile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }
}

#[derive(Default)]
struct Volatile {
    obs_key: Option<Bits>,
}

impl Volatile {
    fn clear(&mut self) {
        if let Some(k) = self.obs_key.as_mut() {
            k.zeroize();
        }
        self.obs_key = None;
    }
}

impl Drop for Volatile {
    fn drop(&mut self) {
        self.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthOutcome {
    pub unlocked: bool,
    pub functional_match: f64,
}

pub struct Device {
    config: ProtocolConfig,
    puf: ArbiterPuf,
    crp_port: bool,
    nonvolatile: NonVolatile,
    volatile: Volatile,
}

impl Device {
    /// A fresh device on the factory floor, CRP port open.
    pub fn manufacture(id: DeviceId, config: ProtocolConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let puf = ArbiterPuf::new(id, config.n_stages, config.puf_noise_sigma, seed)?;
        Ok(Device {
            config,
            puf,
            crp_port: true,
            nonvolatile: NonVolatile::default(),
            volatile: Volatile::default(),
        })
    }

    pub fn id(&self) -> &DeviceId {
        self.puf.device_id()
    }

    /// Ground-truth PUF, for simulation harnesses.
    pub fn puf(&self) -> &ArbiterPuf {
        &self.puf
    }

    pub fn nonvolatile(&self) -> &NonVolatile {
        &self.nonvolatile
    }

    /// Overwrites persistent storage, e.g. with an image copied from
    /// another device.
    pub fn load_image(&mut self, image: NonVolatile) {
        self.volatile.clear();
        self.nonvolatile = image;
    }

    pub fn crp_port_enabled(&self) -> bool {
        self.crp_port
    }

    pub fn is_unlocked(&self) -> bool {
        self.volatile.obs_key.is_some()
    }

    fn read_crps(&self, count: usize, seed: u64) -> Result<crate::pufsim::CrpSet> {
        if !self.crp_port {
            return Err(Error::Protocol(format!("{}: CRP port is disabled", self.id())));
        }
        collect_crps(&self.puf, count, seed)
    }

    fn disable_crp_port(&mut self) {
        self.crp_port = false;
    }

    /// Quantizes the owner's enrollment recordings, persists the helper
    /// data and returns the digest for the designer. Happens once.
    pub fn ownership_claim(
        &mut self,
        recordings: &[RawSignal],
        artifacts: &QuantArtifacts,
        transcript: &mut SessionTranscript,
        seed: u64,
    ) -> Result<Digest> {
        if self.nonvolatile.helper.is_some() || self.nonvolatile.firmware.is_some() {
            return Err(Error::Protocol(format!("{} is already claimed", self.id())));
        }
        transcript.push(
            Channel::UserDevice,
            self.id(),
            Payload::Biometric {
                recordings: recordings.len(),
            },
        );
        let mut samples = Vec::new();
        for r in recordings {
            samples.extend(beat_features(r, &artifacts.pipeline)?);
        }
        if samples.len() < 2 {
            return Err(Error::Enrollment(format!(
                "{}: {} usable enrollment beats, need at least 2",
                self.id(),
                samples.len()
            )));
        }
        let (key, mut helper) = enroll_subject(&samples, &artifacts.pop, &artifacts.config, &artifacts.margins)?;
        if self.config.ecc_n > 1 {
            helper = attach_ecc(&helper, &key, CodeSpec::repetition(self.config.ecc_n)?, seed)?;
        }
        let digest = key_digest(&key);
        drop(key);
        self.nonvolatile.helper = Some(helper);
        self.nonvolatile.pipeline = Some(artifacts.pipeline.clone());
        transcript.push(Channel::DeviceDesigner, self.id(), Payload::ChallengeDigest { digest });
        Ok(digest)
    }

    pub fn install_firmware(&mut self, firmware: Firmware) -> Result<()> {
        if self.nonvolatile.helper.is_none() {
            return Err(Error::NotEnrolled(format!("{} has no owner", self.id())));
        }
        if self.nonvolatile.firmware.is_some() {
            return Err(Error::Protocol(format!("{} already has firmware", self.id())));
        }
        firmware.validate(self.config.challenge_candidates)?;
        self.nonvolatile.firmware = Some(firmware);
        Ok(())
    }

    /// Regenerates the biometric key from 1 or `ecc_n` recordings, derives
    /// the obfuscation key from the physical PUF, and checks the unlocked
    /// bitstream against `reference`. The key is kept in volatile memory
    /// only when it unlocks.
    pub fn authenticate(
        &mut self,
        recordings: &[RawSignal],
        reference: &LutNetlist,
        transcript: &mut SessionTranscript,
        seed: u64,
    ) -> Result<AuthOutcome> {
        self.volatile.clear();
        let (Some(helper), Some(firmware), Some(pipeline)) = (
            self.nonvolatile.helper.as_ref(),
            self.nonvolatile.firmware.as_ref(),
            self.nonvolatile.pipeline.as_ref(),
        ) else {
            return Err(Error::NotEnrolled(format!("{} has no helper data or firmware", self.id())));
        };
        transcript.push(
            Channel::UserDevice,
            self.id(),
            Payload::Biometric {
                recordings: recordings.len(),
            },
        );
        let mut readings = Vec::with_capacity(recordings.len());
        for r in recordings {
            match recording_features(r, pipeline)? {
                Some(f) => readings.push(f),
                None => {
                    transcript.push(Channel::DeviceUser, self.id(), Payload::Unlock { unlocked: false });
                    return Ok(AuthOutcome {
                        unlocked: false,
                        functional_match: 0.0,
                    });
                }
            }
        }
        let key = regenerate_from_readings(&readings, helper)?;
        let digest = key_digest(&key);
        drop(key);
        let bitstream = &firmware.bitstream;
        let per_bit = self.config.challenge_candidates;
        let rep = self.config.response_repetition;
        let candidates = expand_challenges(&digest, bitstream.key_len * per_bit, self.config.n_stages)?;
        let chosen: Vec<_> = firmware
            .selection
            .iter()
            .enumerate()
            .flat_map(|(j, &i)| std::iter::repeat_n(&candidates[j * per_bit + i as usize], rep))
            .cloned()
            .collect();
        let mut responses = self.puf.respond(&chosen, seed)?;
        let mut obs_key = vote(&responses, rep);
        responses.zeroize();
        let matched = functional_match(bitstream, &obs_key, reference)?;
        let unlocked = matched == 1.0;
        if unlocked {
            self.volatile.obs_key = Some(obs_key);
        } else {
            obs_key.zeroize();
        }
        transcript.push(Channel::DeviceUser, self.id(), Payload::Unlock { unlocked });
        Ok(AuthOutcome {
            unlocked,
            functional_match: matched,
        })
    }

    /// Runs the installed circuit; requires a successful authentication
    /// since the last power cycle.
    pub fn run(&self, inputs: &Bits) -> Result<Bits> {
        let firmware = self
            .nonvolatile
            .firmware
            .as_ref()
            .ok_or_else(|| Error::NotEnrolled(format!("{} has no firmware", self.id())))?;
        let key = self
            .volatile
            .obs_key
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("{} is locked; authenticate first", self.id())))?;
        firmware.bitstream.evaluate(key, inputs)
    }

    /// Power loss: volatile state is gone.
    pub fn power_cycle(&mut self) {
        self.volatile.clear();
    }
}

/// Where a secret was found in a byte store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub encoding: &'static str,
    /// The matched bytes, lossily decoded for display.
    pub needle: String,
    pub secret_offset: usize,
    pub store_offset: usize,
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Looks for any `window`-bit slice of `secret` (every bit offset) in
/// `store`: packed MSB first, as lowercase hex and as a `0`/`1` string.
/// Secrets shorter than the window are searched whole, zero-padded like
/// [`Bits::to_hex`] and [`Bits::to_bytes`]. Each encoding is skipped below
/// its minimum length.
pub fn scan_for_bits(store: &[u8], secret: &Bits, window: usize) -> Option<Finding> {
    let w = window.min(secret.len());
    if w == 0 {
        return None;
    }
    let whole = w == secret.len();
    for offset in 0..=secret.len() - w {
        let slice = secret.slice(offset, offset + w);
        let mut encodings: Vec<(&'static str, Vec<u8>)> = Vec::with_capacity(3);
        if w >= MIN_PACKED_BITS && (whole || w.is_multiple_of(8)) {
            encodings.push(("packed", slice.to_bytes()));
        }
        if w >= MIN_HEX_BITS && (whole || w.is_multiple_of(4)) {
            encodings.push(("hex", slice.to_hex().into_bytes()));
        }
        if w >= MIN_BINARY_BITS {
            encodings.push(("binary", slice.to_binary_string().into_bytes()));
        }
        for (encoding, needle) in encodings {
            if let Some(store_offset) = find(store, &needle) {
                return Some(Finding {
                    encoding,
                    needle: String::from_utf8_lossy(&needle).into_owned(),
                    secret_offset: offset,
                    store_offset,
                });
            }
        }
    }
    None
}

/// Looks for raw template values in `store`: little- and big-endian
/// `f64` bytes, and their shortest decimal text as a standalone number
/// token when it has at least eight characters.
pub fn scan_for_values(store: &[u8], values: &[f64]) -> Option<Finding> {
    let mut words: HashMap<[u8; 8], usize> = HashMap::with_capacity(store.len());
    for (i, w) in store.windows(8).enumerate() {
        words.entry(w.try_into().expect("window of 8")).or_insert(i);
    }
    let mut tokens: HashMap<&[u8], usize> = HashMap::new();
    let mut start = 0;
    for (i, &c) in store.iter().chain([&b' ']).enumerate() {
        let numeric = c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E');
        if !numeric {
            if i > start {
                tokens.entry(&store[start..i]).or_insert(start);
            }
            start = i + 1;
        }
    }
    for (i, v) in values.iter().enumerate() {
        let hit = |encoding, store_offset| Finding {
            encoding,
            needle: v.to_string(),
            secret_offset: i,
            store_offset,
        };
        if let Some(&at) = words.get(&v.to_le_bytes()) {
            return Some(hit("f64le", at));
        }
        if let Some(&at) = words.get(&v.to_be_bytes()) {
            return Some(hit("f64be", at));
        }
        let text = v.to_string();
        if text.len() >= 8 {
            if let Some(&at) = tokens.get(text.as_bytes()) {
                return Some(hit("decimal", at));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_takes_majorities() {
        let r = Bits::from_binary_string("110 001 111 000".replace(' ', "").as_str()).unwrap();
        assert_eq!(vote(&r, 3).to_binary_string(), "1010");
    }

    #[test]
    fn scanner_finds_planted_windows() {
        let secret = Bits::from_hex("9e3779b97f4a7c15", 64).unwrap();
        let mut store = b"{\"helper\": \"".to_vec();
        store.extend(secret.slice(8, 40).to_hex().bytes());
        store.extend(b"\"}");
        let f = scan_for_bits(&store, &secret, 32).unwrap();
        assert_eq!(f.encoding, "hex");
        assert_eq!(f.secret_offset, 8);
        assert!(scan_for_bits(b"nothing here", &secret, 32).is_none());
    }

    #[test]
    fn scanner_finds_packed_and_binary_forms() {
        let secret: Bits = (0..40).map(|i| i % 3 == 0).collect();
        let mut store = vec![0u8; 5];
        store.extend(secret.slice(0, 32).to_bytes());
        assert_eq!(scan_for_bits(&store, &secret, 32).unwrap().encoding, "packed");
        let text = secret.slice(3, 35).to_binary_string();
        assert_eq!(scan_for_bits(text.as_bytes(), &secret, 32).unwrap().encoding, "binary");
    }

    #[test]
    fn short_secrets_are_not_scanned() {
        let secret = Bits::from_binary_string("1011").unwrap();
        assert!(scan_for_bits(b"1011", &secret, 32).is_none());
        let secret = Bits::from_binary_string("10110010").unwrap();
        assert!(scan_for_bits(b"x10110010x", &secret, 32).is_some());
        assert!(scan_for_bits(b"b2", &secret, 32).is_none());
    }

    #[test]
    fn value_scanner() {
        let v = [0.123456789_f64, -1.5];
        let store = format!("{{\"x\": {}}}", v[0]);
        assert_eq!(scan_for_values(store.as_bytes(), &v).unwrap().encoding, "decimal");
        assert!(scan_for_values(b"{}", &v).is_none());
    }

    #[test]
    fn transcript_rejects_secrets_towards_designer() {
        let mut t = SessionTranscript::default();
        let id = DeviceId::from("d0");
        t.push(Channel::DeviceDesigner, &id, Payload::ChallengeDigest { digest: Digest::of(b"x") });
        t.check_channel_minimality().unwrap();
        t.push(Channel::DeviceDesigner, &id, Payload::Biometric { recordings: 1 });
        assert!(t.check_channel_minimality().is_err());
    }

    #[test]
    fn config_validation() {
        ProtocolConfig::default().validate().unwrap();
        let even = ProtocolConfig {
            response_repetition: 4,
            ..Default::default()
        };
        assert!(even.validate().is_err());
    }
}

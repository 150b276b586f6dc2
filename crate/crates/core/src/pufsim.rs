//! Arbiter PUF under the additive delay model, CRP collection, the
//! designer's logistic-regression model of a device, and counter-mode
//! challenge expansion.

use std::fmt;
use std::io::{Read, Write};

use log::warn;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

pub const MODEL_VERSION: u32 = 1;
/// Upper bound on `k * n_stages` for challenge expansion.
pub const MAX_EXPANDED_BITS: usize = 1_000_000;
/// Below this many CRPs a model is still trained, with a warning.
pub const MIN_TRAINING_CRPS: usize = 50;
pub const MAX_EPOCHS: usize = 10_000;
pub const LOSS_TOLERANCE: f64 = 1e-6;
const LEARNING_RATE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub String);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId(s.to_owned())
    }
}

/// A 256-bit one-way digest used as the seed of challenge expansion.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Digest> {
        let raw = hex::decode(text).map_err(|e| Error::Parse(format!("digest: {e}")))?;
        let bytes: [u8; 32] = raw.try_into().map_err(|v: Vec<u8>| Error::SizeMismatch {
            what: "digest bytes",
            expected: 32,
            actual: v.len(),
        })?;
        Ok(Digest(bytes))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Digest::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

/// One challenge: a bit per stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Challenge(pub Bits);

impl Challenge {
    pub fn n_stages(&self) -> usize {
        self.0.len()
    }

    pub fn random(n_stages: usize, rng: &mut impl rand::Rng) -> Challenge {
        Challenge((0..n_stages).map(|_| rng.random::<bool>()).collect())
    }
}

/// Parity feature map of the additive delay model: `phi_i = prod_{j>=i}
/// (1 - 2 c_j)` for each stage, followed by a constant 1.
pub fn feature_map(c: &Challenge) -> Vec<f64> {
    let n = c.n_stages();
    let mut phi = vec![1.0; n + 1];
    let mut acc = 1.0;
    for i in (0..n).rev() {
        if c.0.get(i) {
            acc = -acc;
        }
        phi[i] = acc;
    }
    phi
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Simulated device. Weights are the stage delay differences plus the
/// arbiter bias, drawn once at manufacture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbiterPuf {
    device_id: DeviceId,
    weights: Vec<f64>,
    noise_sigma: f64,
}

impl ArbiterPuf {
    pub fn new(device_id: DeviceId, n_stages: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        if n_stages == 0 {
            return Err(Error::config("an arbiter PUF needs at least one stage"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::config(format!("noise sigma {noise_sigma} must be finite and >= 0")));
        }
        let mut r = rng(seed);
        let weights = (0..=n_stages).map(|_| StandardNormal.sample(&mut r)).collect();
        Ok(ArbiterPuf {
            device_id,
            weights,
            noise_sigma,
        })
    }

    pub fn device_id(&self) -> &DeviceId {
        &self.device_id
    }

    pub fn n_stages(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Same silicon under a different operating noise level.
    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::config(format!("noise sigma {noise_sigma} must be finite and >= 0")));
        }
        Ok(ArbiterPuf {
            noise_sigma,
            ..self.clone()
        })
    }

    fn check(&self, c: &Challenge) -> Result<()> {
        if c.n_stages() != self.n_stages() {
            return Err(Error::SizeMismatch {
                what: "challenge bits",
                expected: self.n_stages(),
                actual: c.n_stages(),
            });
        }
        Ok(())
    }

    /// Noise-free delay difference `w . phi(c)`.
    pub fn delay(&self, c: &Challenge) -> Result<f64> {
        self.check(c)?;
        Ok(dot(&self.weights, &feature_map(c)))
    }

    pub fn eval_noiseless(&self, c: &Challenge) -> Result<bool> {
        Ok(self.delay(c)? > 0.0)
    }

    /// Response under evaluation noise; the draw is fixed by `seed`.
    pub fn eval(&self, c: &Challenge, seed: u64) -> Result<bool> {
        let delay = self.delay(c)?;
        if self.noise_sigma == 0.0 {
            return Ok(delay > 0.0);
        }
        let noise = Normal::new(0.0, self.noise_sigma)
            .map_err(|e| Error::Numeric(format!("noise distribution: {e}")))?
            .sample(&mut rng(seed));
        Ok(delay + noise > 0.0)
    }

    /// One response bit per challenge, each with its own noise draw.
    pub fn respond(&self, challenges: &[Challenge], seed: u64) -> Result<Bits> {
        challenges
            .iter()
            .enumerate()
            .map(|(i, c)| self.eval(c, derive_seed(seed, &[i as u64])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crp {
    pub challenge: Challenge,
    pub response: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CrpSet {
    pub n_stages: usize,
    pub crps: Vec<Crp>,
}

impl CrpSet {
    pub fn len(&self) -> usize {
        self.crps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crps.is_empty()
    }
}

/// Uniform random challenges answered without noise, as in the trusted
/// enrollment environment.
pub fn collect_crps(puf: &ArbiterPuf, count: usize, seed: u64) -> Result<CrpSet> {
    if count == 0 {
        warn!("collecting an empty CRP set for {}", puf.device_id());
    }
    let mut r = rng(seed);
    let crps = (0..count)
        .map(|_| {
            let challenge = Challenge::random(puf.n_stages(), &mut r);
            let response = puf.eval_noiseless(&challenge)?;
            Ok(Crp {
                challenge,
                response,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrpSet {
        n_stages: puf.n_stages(),
        crps,
    })
}

#[derive(Serialize, Deserialize)]
struct CrpRecord {
    challenge: String,
    response: u8,
}

/// CSV with a `challenge,response` header: challenge as hex (MSB first,
/// zero-padded to whole nibbles), response as 0/1.
pub fn write_crps_csv<W: Write>(set: &CrpSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for crp in &set.crps {
        w.serialize(CrpRecord {
            challenge: crp.challenge.0.to_hex(),
            response: crp.response as u8,
        })?;
    }
    w.flush().map_err(|e| Error::io("<crp csv>", e))?;
    Ok(())
}

pub fn read_crps_csv<R: Read>(input: R, n_stages: usize) -> Result<CrpSet> {
    let mut crps = Vec::new();
    for record in csv::Reader::from_reader(input).deserialize() {
        let record: CrpRecord = record?;
        let response = match record.response {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("response bit must be 0 or 1, got {other}"))),
        };
        crps.push(Crp {
            challenge: Challenge(Bits::from_hex(&record.challenge, n_stages)?),
            response,
        });
    }
    Ok(CrpSet { n_stages, crps })
}

/// The designer's linear model of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PufModel {
    pub version: u32,
    pub n_stages: usize,
    pub learned_weights: Vec<f64>,
    pub train_accuracy: f64,
    /// Accuracy on the held-out tenth of the CRPs; `None` when the split
    /// would be empty.
    pub holdout_accuracy: Option<f64>,
    pub epochs: usize,
    pub converged: bool,
}

impl PufModel {
    /// Predicted delay difference; its magnitude is the model's confidence.
    pub fn predicted_delay(&self, c: &Challenge) -> Result<f64> {
        if c.n_stages() != self.n_stages {
            return Err(Error::SizeMismatch {
                what: "challenge bits",
                expected: self.n_stages,
                actual: c.n_stages(),
            });
        }
        Ok(dot(&self.learned_weights, &feature_map(c)))
    }

    pub fn predict(&self, c: &Challenge) -> Result<bool> {
        Ok(self.predicted_delay(c)? > 0.0)
    }

    pub fn predict_all(&self, challenges: &[Challenge]) -> Result<Bits> {
        challenges.iter().map(|c| self.predict(c)).collect()
    }

    pub fn accuracy(&self, set: &CrpSet) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::Degenerate("accuracy of an empty CRP set".into()));
        }
        let mut hits = 0usize;
        for crp in &set.crps {
            hits += (self.predict(&crp.challenge)? == crp.response) as usize;
        }
        Ok(hits as f64 / set.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PufModel = serde_json::from_str(text)?;
        if model.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "PUF model version {} is not supported (expected {MODEL_VERSION})",
                model.version
            )));
        }
        if model.learned_weights.len() != model.n_stages + 1 {
            return Err(Error::SizeMismatch {
                what: "model weights",
                expected: model.n_stages + 1,
                actual: model.learned_weights.len(),
            });
        }
        Ok(model)
    }
}

/// Full-batch gradient descent on the logistic loss over the parity
/// features, stopping when an epoch changes the loss by less than 1e-6 or
/// after 10^4 epochs. The last tenth of the set is held out.
pub fn train_model(set: &CrpSet) -> Result<PufModel> {
    if set.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training needs at least 2 CRPs, got {}",
            set.len()
        )));
    }
    if set.len() < MIN_TRAINING_CRPS {
        warn!(
            "training on {} CRPs (< {MIN_TRAINING_CRPS}); expect poor accuracy",
            set.len()
        );
    }
    let holdout = set.len() / 10;
    let split = set.len() - holdout;
    let (train, test) = set.crps.split_at(split);
    let x: Vec<Vec<f64>> = train.iter().map(|c| feature_map(&c.challenge)).collect();
    let y: Vec<f64> = train.iter().map(|c| if c.response { 1.0 } else { -1.0 }).collect();
    let dim = set.n_stages + 1;
    if let Some(bad) = x.iter().find(|f| f.len() != dim) {
        return Err(Error::SizeMismatch {
            what: "challenge bits",
            expected: set.n_stages,
            actual: bad.len() - 1,
        });
    }

    let n = x.len() as f64;
    let mut w = vec![0.0; dim];
    let mut best = (f64::INFINITY, w.clone());
    let mut previous = f64::INFINITY;
    let mut converged = false;
    let mut epochs = 0;
    let mut grad = vec![0.0; dim];
    while epochs < MAX_EPOCHS {
        // One pass yields the loss at `w` and its gradient.
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (xi, &yi) in x.iter().zip(&y) {
            let m = yi * dot(&w, xi);
            // log(1 + exp(-m)) without overflow; its derivative in z is
            // -y * sigmoid(-m).
            loss += if m < 0.0 { -m + m.exp().ln_1p() } else { (-m).exp().ln_1p() };
            let s = -yi / (1.0 + m.exp());
            for (g, v) in grad.iter_mut().zip(xi) {
                *g += s * v;
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::Numeric("logistic loss diverged".into()));
        }
        if loss < best.0 {
            best = (loss, w.clone());
        }
        if (previous - loss).abs() < LOSS_TOLERANCE {
            converged = true;
            break;
        }
        previous = loss;
        epochs += 1;
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= LEARNING_RATE * g / n;
        }
    }
    if !converged {
        warn!("PUF model did not converge in {MAX_EPOCHS} epochs; keeping the best iterate");
    }

    let mut model = PufModel {
        version: MODEL_VERSION,
        n_stages: set.n_stages,
        learned_weights: best.1,
        train_accuracy: 0.0,
        holdout_accuracy: None,
        epochs,
        converged,
    };
    model.train_accuracy = model.accuracy(&CrpSet {
        n_stages: set.n_stages,
        crps: train.to_vec(),
    })?;
    if !test.is_empty() {
        model.holdout_accuracy = Some(model.accuracy(&CrpSet {
            n_stages: set.n_stages,
            crps: test.to_vec(),
        })?);
    }
    Ok(model)
}

/// Counter-mode expansion: SHA-256(digest || counter as u64 big-endian)
/// blocks, concatenated MSB first and cut into `k` challenges.
pub fn expand_challenges(digest: &Digest, k: usize, n_stages: usize) -> Result<Vec<Challenge>> {
    let total = k
        .checked_mul(n_stages)
        .filter(|&t| t <= MAX_EXPANDED_BITS)
        .ok_or_else(|| {
            Error::config(format!(
                "expanding {k} challenges of {n_stages} bits exceeds {MAX_EXPANDED_BITS} bits"
            ))
        })?;
    let mut stream = Bits::new();
    let mut counter: u64 = 0;
    while stream.len() < total {
        let mut h = Sha256::new();
        h.update(digest.0);
        h.update(counter.to_be_bytes());
        for byte in h.finalize() {
            for bit in (0..8).rev() {
                stream.push(byte >> bit & 1 == 1);
            }
        }
        counter += 1;
    }
    Ok((0..k)
        .map(|i| Challenge(stream.slice(i * n_stages, (i + 1) * n_stages)))
        .collect())
}

use std::fmt;

use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use super::margins::{gray_code, thresholds, MarginTable};
use super::stats::{normalize_with, subject_stats, PopulationStats, SubjectStats};
use super::{QuantConfig, MAX_DEPTH};
use crate::bits::Bits;
use crate::ecc::{self, CodeSpec, EccHelper};
use crate::error::{Error, Result};
use crate::sigproc::FeatureVector;

pub const HELPER_VERSION: u32 = 1;

/// Key bits quantized from a biometric. Cleared on drop.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BioKey {
    bits: Bits,
}

impl BioKey {
    pub fn new(bits: Bits) -> Self {
        BioKey { bits }
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_hex(&self) -> String {
        self.bits.to_hex()
    }

    pub fn from_hex(text: &str, len: usize) -> Result<Self> {
        Ok(BioKey::new(Bits::from_hex(text, len)?))
    }
}

impl fmt::Debug for BioKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BioKey({} bits)", self.len())
    }
}

impl Zeroize for BioKey {
    fn zeroize(&mut self) {
        self.bits.zeroize();
    }
}

impl Drop for BioKey {
    fn drop(&mut self) {
        self.zeroize();
    }
}

/// Public per-user data needed to regenerate a key: which features, at
/// which depth, how to normalize them, and an optional ECC offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelperData {
    pub version: u32,
    pub selected: Vec<usize>,
    pub bits_of: Vec<u8>,
    /// `(mean, std)` for every feature of the sample space.
    pub normalization: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecc_helper: Option<EccHelper>,
}

impl HelperData {
    pub fn key_len(&self) -> usize {
        self.bits_of.iter().map(|&b| b as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.normalization.len()
    }

    /// The selection and normalization alone, without the ECC offset.
    pub fn without_ecc(&self) -> HelperData {
        HelperData {
            ecc_helper: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != HELPER_VERSION {
            return Err(Error::Parse(format!(
                "unsupported helper data version {} (expected {HELPER_VERSION})",
                self.version
            )));
        }
        if self.selected.len() != self.bits_of.len() {
            return Err(Error::SizeMismatch {
                what: "bits_of entries",
                expected: self.selected.len(),
                actual: self.bits_of.len(),
            });
        }
        if !self.selected.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parse("selected indices must be unique and sorted".into()));
        }
        if let Some(&k) = self.selected.iter().find(|&&k| k >= self.dim()) {
            return Err(Error::Parse(format!("selected index {k} outside dimension {}", self.dim())));
        }
        if let Some(&b) = self.bits_of.iter().find(|&&b| b == 0 || b > MAX_DEPTH) {
            return Err(Error::Parse(format!("bits per feature {b} outside 1..={MAX_DEPTH}")));
        }
        if let Some(e) = &self.ecc_helper {
            if e.key_len() != self.key_len() || e.offset.len() != self.key_len() * e.spec.n() {
                return Err(Error::Parse("ECC offset length does not match key length".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: HelperData = serde_json::from_str(text)?;
        h.validate()?;
        Ok(h)
    }
}

/// Bits for a normalized value quantized at depth `d`.
pub fn quantize_value(x: f64, d: u8) -> Bits {
    quantize_with(x, &thresholds(d), d)
}

fn quantize_with(x: f64, ts: &[f64], d: u8) -> Bits {
    gray_code(ts.partition_point(|t| *t <= x), d)
}

/// Selects every retained feature whose mean is reliable at some depth and
/// concatenates the Gray codes of the deepest reliable regions.
pub fn enroll_from_stats(
    stats: &SubjectStats,
    pop: &PopulationStats,
    margins: &MarginTable,
) -> Result<(BioKey, HelperData)> {
    if stats.dim() != pop.dim() || margins.dim() != pop.dim() {
        return Err(Error::SizeMismatch {
            what: "enrollment dimension",
            expected: pop.dim(),
            actual: if stats.dim() != pop.dim() { stats.dim() } else { margins.dim() },
        });
    }
    let mut selected = Vec::new();
    let mut bits_of = Vec::new();
    let mut key = Bits::new();
    for (k, &mu) in stats.mu.iter().enumerate() {
        if !pop.features[k].retained() {
            continue;
        }
        if let Some((d, region)) = margins.best(k, mu) {
            selected.push(k);
            bits_of.push(d);
            key.extend_from(&gray_code(region, d));
        }
    }
    if selected.is_empty() {
        return Err(Error::Enrollment("no feature is reliable for this subject".into()));
    }
    let helper = HelperData {
        version: HELPER_VERSION,
        selected,
        bits_of,
        normalization: pop.normalization(),
        ecc_helper: None,
    };
    Ok((BioKey::new(key), helper))
}

pub fn enroll_subject(
    samples: &[FeatureVector],
    pop: &PopulationStats,
    config: &QuantConfig,
    margins: &MarginTable,
) -> Result<(BioKey, HelperData)> {
    config.validate()?;
    if margins.max_depth() > config.max_bits {
        return Err(Error::config(format!(
            "margin table reaches depth {} beyond max_bits {}",
            margins.max_depth(),
            config.max_bits
        )));
    }
    let stats = subject_stats(samples, pop)?;
    enroll_from_stats(&stats, pop, margins)
}

/// Adds a fuzzy-commitment offset for `key` to the helper.
pub fn attach_ecc(helper: &HelperData, key: &BioKey, spec: CodeSpec, seed: u64) -> Result<HelperData> {
    if key.len() != helper.key_len() {
        return Err(Error::SizeMismatch {
            what: "key length",
            expected: helper.key_len(),
            actual: key.len(),
        });
    }
    Ok(HelperData {
        ecc_helper: Some(ecc::make_helper(key.bits(), spec, seed)?),
        ..helper.clone()
    })
}

/// Quantizes the selected features without error correction.
pub fn regenerate_raw(sample: &FeatureVector, helper: &HelperData) -> Result<BioKey> {
    let x = normalize_with(sample, helper.normalization.iter().copied(), helper.dim())?;
    let tables: Vec<Vec<f64>> = (1..=MAX_DEPTH).map(thresholds).collect();
    let mut key = Bits::new();
    for (&k, &d) in helper.selected.iter().zip(&helper.bits_of) {
        if k >= x.len() || d == 0 || d > MAX_DEPTH {
            return Err(Error::Parse(format!("helper entry ({k}, {d}) is out of range")));
        }
        key.extend_from(&quantize_with(x[k], &tables[d as usize - 1], d));
    }
    Ok(BioKey::new(key))
}

/// Quantizes a sample and, if the helper carries an ECC offset, decodes
/// through it. A single reading cannot outvote its own errors; use
/// [`regenerate_from_readings`] to supply one reading per code position.
pub fn regenerate_key(sample: &FeatureVector, helper: &HelperData) -> Result<BioKey> {
    let raw = regenerate_raw(sample, helper)?;
    match &helper.ecc_helper {
        Some(e) => Ok(BioKey::new(ecc::recover_key(raw.bits(), e)?)),
        None => Ok(raw),
    }
}

/// Regenerates from `n` independent readings, majority-decoding each key
/// bit through the helper's repetition code of length `n`.
pub fn regenerate_from_readings(samples: &[FeatureVector], helper: &HelperData) -> Result<BioKey> {
    match (samples, &helper.ecc_helper) {
        ([single], _) => regenerate_key(single, helper),
        (_, Some(e)) if samples.len() == e.spec.n() => {
            let raws = samples
                .iter()
                .map(|s| regenerate_raw(s, helper).map(|k| k.bits().clone()))
                .collect::<Result<Vec<_>>>()?;
            let expanded = ecc::interleave_readings(&raws)?;
            Ok(BioKey::new(ecc::recover_key(&expanded, e)?))
        }
        _ => Err(Error::config(format!(
            "{} readings given; expected 1 or the ECC block length",
            samples.len()
        ))),
    }
}

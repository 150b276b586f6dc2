use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use super::keygen::{BioKey, HelperData};
use crate::error::{Error, Result};

/// Bit positions contributed by fewer subjects are left out of the
/// min-entropy estimate.
pub const MIN_CONTRIBUTORS: usize = 10;

/// Mean fraction of bits each regenerated key shares with the enrolled key.
pub fn reliability(enrolled: &BioKey, regenerated: &[BioKey]) -> Result<f64> {
    if regenerated.is_empty() {
        return Err(Error::config("reliability needs at least one regenerated key"));
    }
    if enrolled.is_empty() {
        return Err(Error::config("reliability of an empty key is undefined"));
    }
    let mut total = 0.0;
    for k in regenerated {
        let d = enrolled.bits().hamming(k.bits())?;
        total += 1.0 - d as f64 / enrolled.len() as f64;
    }
    Ok(total / regenerated.len() as f64)
}

/// A key bit identified by its source feature and its place in that
/// feature's Gray code; the same position means the same thing for every
/// subject that selects the feature deeply enough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitPosition {
    pub feature: usize,
    pub bit: u8,
}

pub fn aligned_bits(key: &BioKey, helper: &HelperData) -> Result<Vec<(BitPosition, bool)>> {
    if key.len() != helper.key_len() {
        return Err(Error::SizeMismatch {
            what: "key length",
            expected: helper.key_len(),
            actual: key.len(),
        });
    }
    let mut out = Vec::with_capacity(key.len());
    let mut i = 0;
    for (&feature, &d) in helper.selected.iter().zip(&helper.bits_of) {
        for bit in 0..d {
            out.push((BitPosition { feature, bit }, key.bits().get(i)));
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinEntropyReport {
    pub per_position: BTreeMap<BitPosition, f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Positions with too few contributors.
    pub skipped: usize,
}

/// Per-position `-log2(max(Pr[0], Pr[1]))` over the subjects contributing
/// that position.
pub fn min_entropy(keys: &[(&BioKey, &HelperData)], min_contributors: usize) -> Result<MinEntropyReport> {
    let mut counts: BTreeMap<BitPosition, (usize, usize)> = BTreeMap::new();
    for (key, helper) in keys {
        for (pos, bit) in aligned_bits(key, helper)? {
            let c = counts.entry(pos).or_default();
            c.0 += 1;
            c.1 += bit as usize;
        }
    }
    let mut per_position = BTreeMap::new();
    let mut skipped = 0;
    for (pos, (n, ones)) in counts {
        if n < min_contributors.max(1) {
            skipped += 1;
            continue;
        }
        let p = ones.max(n - ones) as f64 / n as f64;
        per_position.insert(pos, -p.log2());
    }
    if skipped > 0 {
        debug!("min-entropy: skipped {skipped} positions with fewer than {min_contributors} contributors");
    }
    let (mean, min, max) = summarize(per_position.values().copied()).ok_or_else(|| {
        Error::Degenerate(format!(
            "no bit position has {min_contributors} or more contributing subjects"
        ))
    })?;
    Ok(MinEntropyReport {
        per_position,
        mean,
        min,
        max,
        skipped,
    })
}

fn summarize(values: impl Iterator<Item = f64>) -> Option<(f64, f64, f64)> {
    let mut n = 0usize;
    let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        n += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    (n > 0).then(|| (sum / n as f64, min, max))
}

/// One metrics row per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetrics {
    pub subject_id: String,
    pub key_len: usize,
    pub reliability: f64,
    pub min_entropy_mean: f64,
    pub min_entropy_min: f64,
    pub min_entropy_max: f64,
}

/// Reliability of the subject's regenerations and the population
/// min-entropy of the positions its key occupies (NaN if none qualify).
pub fn subject_metrics(
    subject_id: &str,
    enrolled: &BioKey,
    helper: &HelperData,
    regenerated: &[BioKey],
    entropy: &MinEntropyReport,
) -> Result<SubjectMetrics> {
    let rel = reliability(enrolled, regenerated)?;
    let values = aligned_bits(enrolled, helper)?
        .into_iter()
        .filter_map(|(p, _)| entropy.per_position.get(&p).copied());
    let (mean, min, max) = summarize(values).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    Ok(SubjectMetrics {
        subject_id: subject_id.to_string(),
        key_len: enrolled.len(),
        reliability: rel,
        min_entropy_mean: mean,
        min_entropy_min: min,
        min_entropy_max: max,
    })
}

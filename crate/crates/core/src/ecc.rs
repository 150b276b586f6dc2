//! Fuzzy commitment over a repetition code.
//!
//! Each key bit is bound to one random message bit encoded as an `n`-bit
//! repetition block: `offset = encode(msg) XOR repeat(key)`. A noisy
//! reading XORed onto the offset yields a corrupted codeword; majority
//! decoding recovers the message bit, and the key bit follows from the
//! offset. Up to `t = (n - 1) / 2` errors per block are corrected.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Repetition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CodeSpecRepr", into = "CodeSpecRepr")]
pub struct CodeSpec {
    scheme: Scheme,
    n: usize,
}

impl CodeSpec {
    pub fn repetition(n: usize) -> Result<Self> {
        if n == 0 || n.is_multiple_of(2) {
            return Err(Error::config(format!("repetition length must be odd and >= 1, got {n}")));
        }
        Ok(CodeSpec {
            scheme: Scheme::Repetition,
            n,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Data bits per block.
    pub fn k(&self) -> usize {
        1
    }

    /// Correctable errors per block.
    pub fn t(&self) -> usize {
        (self.n - 1) / 2
    }

    fn encode_bit(&self, bit: bool) -> impl Iterator<Item = bool> {
        std::iter::repeat_n(bit, self.n)
    }

    fn decode_block(&self, block: &[bool]) -> bool {
        block.iter().filter(|&&b| b).count() * 2 > self.n
    }
}

#[derive(Serialize, Deserialize)]
struct CodeSpecRepr {
    scheme: Scheme,
    n: usize,
    k: usize,
    t: usize,
}

impl From<CodeSpec> for CodeSpecRepr {
    fn from(c: CodeSpec) -> Self {
        CodeSpecRepr {
            scheme: c.scheme,
            n: c.n,
            k: c.k(),
            t: c.t(),
        }
    }
}

impl TryFrom<CodeSpecRepr> for CodeSpec {
    type Error = Error;

    fn try_from(r: CodeSpecRepr) -> Result<Self> {
        let spec = CodeSpec::repetition(r.n)?;
        if r.k != spec.k() || r.t != spec.t() {
            return Err(Error::Parse(format!(
                "inconsistent code parameters n={} k={} t={}",
                r.n, r.k, r.t
            )));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EccHelper {
    pub offset: Bits,
    pub spec: CodeSpec,
}

impl EccHelper {
    pub fn key_len(&self) -> usize {
        self.offset.len() / self.spec.n()
    }
}

/// Each bit repeated `n` times in place.
pub fn repeat_expand(key: &Bits, n: usize) -> Bits {
    key.iter().flat_map(|b| std::iter::repeat_n(b, n)).collect()
}

/// Interleaves `n` independent readings of a key into the block layout
/// used by the offset: block `j` holds bit `j` of every reading.
pub fn interleave_readings(readings: &[Bits]) -> Result<Bits> {
    let first = readings
        .first()
        .ok_or_else(|| Error::config("at least one reading is required"))?;
    for r in readings {
        if r.len() != first.len() {
            return Err(Error::SizeMismatch {
                what: "reading length",
                expected: first.len(),
                actual: r.len(),
            });
        }
    }
    Ok((0..first.len())
        .flat_map(|j| readings.iter().map(move |r| r.get(j)))
        .collect())
}

pub fn make_helper(key: &Bits, spec: CodeSpec, seed: u64) -> Result<EccHelper> {
    if key.is_empty() {
        return Err(Error::config("cannot commit to an empty key"));
    }
    let mut rng = rng(seed);
    let codeword: Bits = (0..key.len())
        .flat_map(|_| spec.encode_bit(rng.random_bool(0.5)))
        .collect();
    let offset = codeword.xor(&repeat_expand(key, spec.n()))?;
    Ok(EccHelper { offset, spec })
}

/// Recovers the committed key from a noisy reading.
///
/// `noisy` is either a key-length reading, which is repeat-expanded and
/// therefore only reproduces itself, or an already expanded
/// `key_len * n` string such as [`interleave_readings`] builds from `n`
/// independent readings. Blocks with more than `t` errors decode to the
/// wrong bit; nothing here can detect that.
pub fn recover_key(noisy: &Bits, helper: &EccHelper) -> Result<Bits> {
    let n = helper.spec.n();
    let key_len = helper.key_len();
    let expanded = if noisy.len() == key_len {
        repeat_expand(noisy, n)
    } else if noisy.len() == key_len * n {
        noisy.clone()
    } else {
        return Err(Error::SizeMismatch {
            what: "noisy key length",
            expected: key_len,
            actual: noisy.len(),
        });
    };
    let corrupted = helper.offset.xor(&expanded)?;
    Ok((0..key_len)
        .map(|j| {
            let block = &corrupted.as_slice()[j * n..(j + 1) * n];
            let message = helper.spec.decode_block(block);
            // Re-encoding the message and XORing with the offset gives n
            // copies of the key bit; the first is representative.
            helper.offset.get(j * n) ^ message
        })
        .collect())
}

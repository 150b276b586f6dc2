//! Owned bit strings.
//!
//! Keys in this crate are short (hundreds of bits) and are manipulated bit
//! by bit, so a plain `Vec<bool>` is the storage. Packing to bytes and hex
//! is MSB-first; the final partial byte or nibble is zero-padded on the
//! right.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use zeroize::Zeroize;

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Bits(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn slice(&self, start: usize, end: usize) -> Bits {
        Bits(self.0[start..end].to_vec())
    }

    pub fn xor(&self, other: &Bits) -> Result<Bits> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                what: "xor operands",
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn hamming(&self, other: &Bits) -> Result<usize> {
        Ok(self.xor(other)?.count_ones())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bits `value` in `width` bits, MSB first.
    pub fn from_uint(value: u64, width: usize) -> Bits {
        (0..width).rev().map(|k| (value >> k) & 1 == 1).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Bits> {
        if len > bytes.len() * 8 {
            return Err(Error::SizeMismatch {
                what: "packed bit length",
                expected: bytes.len() * 8,
                actual: len,
            });
        }
        Ok((0..len)
            .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
            .collect())
    }

    /// Lowercase hex, one digit per started nibble.
    pub fn to_hex(&self) -> String {
        let mut s = hex::encode(self.to_bytes());
        s.truncate(self.len().div_ceil(4));
        s
    }

    pub fn from_hex(text: &str, len: usize) -> Result<Bits> {
        if text.len() != len.div_ceil(4) {
            return Err(Error::Parse(format!(
                "hex string of {} digits cannot hold exactly {len} bits",
                text.len()
            )));
        }
        let mut padded = text.to_string();
        if padded.len() % 2 == 1 {
            padded.push('0');
        }
        let bytes = hex::decode(&padded).map_err(|e| Error::Parse(e.to_string()))?;
        Bits::from_bytes(&bytes, len)
    }

    /// `'0'`/`'1'` characters.
    pub fn to_binary_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_binary_string(text: &str) -> Result<Bits> {
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect()
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({}:{})", self.len(), self.to_binary_string())
    }
}

impl Zeroize for Bits {
    fn zeroize(&mut self) {
        self.0.iter_mut().for_each(|b| *b = false);
        self.0.clear();
    }
}

/// Serialized as `"<len>:<hex>"` so the exact length survives the round trip.
impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}:{}", self.len(), self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let (len, hex) = s
            .split_once(':')
            .ok_or_else(|| serde::de::Error::custom("expected <len>:<hex>"))?;
        let len: usize = len.parse().map_err(serde::de::Error::custom)?;
        Bits::from_hex(hex, len).map_err(serde::de::Error::custom)
    }
}

//! LUT netlists and key-dependent bitstream obfuscation.
//!
//! A netlist is a list of LUTs in topological order. Each LUT input names a
//! wire: a primary input (`i3`), an earlier LUT's output (`l12`), or, in an
//! obfuscated bitstream, a key bit (`k0`). Truth tables are indexed by the
//! LUT's input vector read as an unsigned integer with the first input as
//! the most significant bit; their hex form lists rows 0, 1, 2, ... MSB
//! first.
//!
//! Primary input vectors used by [`functional_match`] are enumerated as
//! integers whose bit `i` drives input `i`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::rng::rng;

pub const NETLIST_VERSION: u32 = 1;
/// Largest primary-input count checked exhaustively.
pub const MAX_EXHAUSTIVE_INPUTS: usize = 20;
/// Random vectors drawn by [`functional_match_sampled`] by default.
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wire {
    Input(usize),
    Lut(usize),
    Key(usize),
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wire::Input(i) => write!(f, "i{i}"),
            Wire::Lut(i) => write!(f, "l{i}"),
            Wire::Key(i) => write!(f, "k{i}"),
        }
    }
}

impl FromStr for Wire {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid wire name {s:?}"));
        let (kind, index) = s.split_at_checked(1).ok_or_else(bad)?;
        let index: usize = index.parse().map_err(|_| bad())?;
        match kind {
            "i" => Ok(Wire::Input(index)),
            "l" => Ok(Wire::Lut(index)),
            "k" => Ok(Wire::Key(index)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Wire {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Wire {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One lookup table. `table.len() == 2^inputs.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lut {
    pub inputs: Vec<Wire>,
    #[serde(with = "table_hex")]
    pub table: Bits,
}

mod table_hex {
    use super::*;

    pub fn serialize<S: serde::Serializer>(t: &Bits, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_hex())
    }

    /// The row count follows from the hex length only up to a nibble, so
    /// tables are decoded at the largest row count the digits can hold and
    /// trimmed once the fan-in is known.
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Bits, D::Error> {
        let text = String::deserialize(d)?;
        Bits::from_hex(&text, text.len() * 4).map_err(serde::de::Error::custom)
    }
}

impl Lut {
    pub fn new(inputs: Vec<Wire>, table: Bits) -> Result<Self> {
        let lut = Lut { inputs, table };
        lut.check_table()?;
        Ok(lut)
    }

    pub fn fan_in(&self) -> usize {
        self.inputs.len()
    }

    /// Builds the table from a boolean function of the input values.
    pub fn from_fn(inputs: Vec<Wire>, f: impl Fn(&[bool]) -> bool) -> Self {
        let k = inputs.len();
        let table = (0..1usize << k)
            .map(|row| {
                let values: Vec<bool> = (0..k).map(|i| row >> (k - 1 - i) & 1 == 1).collect();
                f(&values)
            })
            .collect();
        Lut { inputs, table }
    }

    fn rows(&self) -> usize {
        1 << self.fan_in()
    }

    fn check_table(&self) -> Result<()> {
        if self.table.len() != self.rows() {
            return Err(Error::SizeMismatch {
                what: "truth table rows",
                expected: self.rows(),
                actual: self.table.len(),
            });
        }
        Ok(())
    }

    fn normalize_table(&mut self) -> Result<()> {
        // Deserialized tables carry whole nibbles; anything past the row
        // count must be padding.
        let rows = self.rows();
        if self.table.len() < rows || self.table.len() > rows.max(4).next_multiple_of(4) {
            return Err(Error::SizeMismatch {
                what: "truth table rows",
                expected: rows,
                actual: self.table.len(),
            });
        }
        if self.table.iter().skip(rows).any(|b| b) {
            return Err(Error::Parse("truth table padding must be zero".into()));
        }
        self.table = self.table.slice(0, rows);
        Ok(())
    }

    fn lookup(&self, values: impl Iterator<Item = bool>) -> bool {
        let row = values.fold(0usize, |acc, v| acc << 1 | v as usize);
        self.table.get(row)
    }
}

/// Combinational LUT network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutNetlist {
    pub version: u32,
    /// Physical LUT capacity; LUTs using fewer inputs have spare pins.
    pub max_inputs: usize,
    pub n_inputs: usize,
    pub luts: Vec<Lut>,
    pub outputs: Vec<Wire>,
}

impl LutNetlist {
    pub fn new(max_inputs: usize, n_inputs: usize, luts: Vec<Lut>, outputs: Vec<Wire>) -> Result<Self> {
        let net = LutNetlist {
            version: NETLIST_VERSION,
            max_inputs,
            n_inputs,
            luts,
            outputs,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// LUTs with a spare input, i.e. the key bits [`obfuscate`] consumes.
    pub fn spare_luts(&self) -> usize {
        self.luts.iter().filter(|l| l.fan_in() < self.max_inputs).count()
    }

    /// Number of key wires referenced.
    pub fn key_len(&self) -> usize {
        self.luts
            .iter()
            .flat_map(|l| &l.inputs)
            .filter_map(|w| match w {
                Wire::Key(k) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Checks version, fan-in bounds, table sizes, and that every LUT reads
    /// only primary inputs, key bits, or earlier LUTs (hence acyclic).
    pub fn validate(&self) -> Result<()> {
        if self.version != NETLIST_VERSION {
            return Err(Error::Parse(format!(
                "netlist version {} is not supported (expected {NETLIST_VERSION})",
                self.version
            )));
        }
        let check_wire = |w: &Wire, before: usize| -> Result<()> {
            match *w {
                Wire::Input(i) if i >= self.n_inputs => {
                    Err(Error::config(format!("wire {w} exceeds the {} primary inputs", self.n_inputs)))
                }
                Wire::Lut(i) if i >= before => Err(Error::config(format!(
                    "wire {w} is not driven by an earlier LUT (cycle or forward reference)"
                ))),
                _ => Ok(()),
            }
        };
        for (idx, lut) in self.luts.iter().enumerate() {
            if lut.fan_in() > self.max_inputs {
                return Err(Error::config(format!(
                    "LUT {idx} has {} inputs, capacity is {}",
                    lut.fan_in(),
                    self.max_inputs
                )));
            }
            lut.check_table()?;
            for w in &lut.inputs {
                check_wire(w, idx)?;
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::config("a netlist needs at least one output"));
        }
        for w in &self.outputs {
            if matches!(w, Wire::Key(_)) {
                return Err(Error::config("key wires cannot drive primary outputs"));
            }
            check_wire(w, self.luts.len())?;
        }
        Ok(())
    }

    /// Topological evaluation. `key` must cover every key wire.
    pub fn evaluate(&self, key: &Bits, inputs: &Bits) -> Result<Bits> {
        if inputs.len() != self.n_inputs {
            return Err(Error::SizeMismatch {
                what: "primary inputs",
                expected: self.n_inputs,
                actual: inputs.len(),
            });
        }
        let key_len = self.key_len();
        if key.len() != key_len {
            return Err(Error::SizeMismatch {
                what: "key bits",
                expected: key_len,
                actual: key.len(),
            });
        }
        let mut values = Vec::with_capacity(self.luts.len());
        let read = |w: &Wire, values: &[bool]| match *w {
            Wire::Input(i) => inputs.get(i),
            Wire::Lut(i) => values[i],
            Wire::Key(i) => key.get(i),
        };
        for lut in &self.luts {
            let out = lut.lookup(lut.inputs.iter().map(|w| read(w, &values)));
            values.push(out);
        }
        Ok(self.outputs.iter().map(|w| read(w, &values)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut net: LutNetlist = serde_json::from_str(text)?;
        for lut in &mut net.luts {
            lut.normalize_table()?;
        }
        net.validate()?;
        Ok(net)
    }
}

/// Where the key bit of one obfuscated LUT enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPosition {
    pub lut: usize,
    pub input_index: usize,
}

/// A netlist whose LUTs carry key wires. It holds no copy of the key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscatedBitstream {
    pub netlist: LutNetlist,
    /// Key bit `j` feeds `key_positions[j]`.
    pub key_positions: Vec<KeyPosition>,
    pub key_len: usize,
}

impl ObfuscatedBitstream {
    pub fn evaluate(&self, key: &Bits, inputs: &Bits) -> Result<Bits> {
        self.netlist.evaluate(key, inputs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut bs: ObfuscatedBitstream = serde_json::from_str(text)?;
        for lut in &mut bs.netlist.luts {
            lut.normalize_table()?;
        }
        bs.validate()?;
        Ok(bs)
    }

    pub fn validate(&self) -> Result<()> {
        self.netlist.validate()?;
        if self.key_positions.len() != self.key_len || self.netlist.key_len() != self.key_len {
            return Err(Error::SizeMismatch {
                what: "key positions",
                expected: self.key_len,
                actual: self.key_positions.len(),
            });
        }
        for (j, p) in self.key_positions.iter().enumerate() {
            let lut = self
                .netlist
                .luts
                .get(p.lut)
                .ok_or_else(|| Error::config(format!("key {j} targets missing LUT {}", p.lut)))?;
            if lut.inputs.get(p.input_index) != Some(&Wire::Key(j)) {
                return Err(Error::config(format!("key {j} position does not match LUT {}", p.lut)));
            }
        }
        Ok(())
    }
}

/// Adds one key wire to every LUT with a spare input, in LUT order. Key bit
/// `j` enters at a seeded position; the half of the widened table selected
/// by the correct bit repeats the original function and the other half is a
/// random decoy. Decoys whose difference never reaches an output are
/// redrawn, so flipping any single key bit changes the function.
pub fn obfuscate(netlist: &LutNetlist, obs_key: &Bits, seed: u64) -> Result<ObfuscatedBitstream> {
    netlist.validate()?;
    if netlist.key_len() != 0 {
        return Err(Error::config("netlist is already obfuscated"));
    }
    let targets: Vec<usize> = netlist
        .luts
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            if l.fan_in() < netlist.max_inputs {
                Some(i)
            } else {
                warn!("LUT {i} has no spare input; left unobfuscated");
                None
            }
        })
        .collect();
    if targets.is_empty() {
        return Err(Error::config("no LUT has a spare input to obfuscate"));
    }
    if obs_key.len() < targets.len() {
        return Err(Error::SizeMismatch {
            what: "obfuscation key bits",
            expected: targets.len(),
            actual: obs_key.len(),
        });
    }
    let mut r = rng(seed);
    let mut out = netlist.clone();
    let mut key_positions = Vec::with_capacity(targets.len());
    for (j, &idx) in targets.iter().enumerate() {
        let lut = &netlist.luts[idx];
        let position = r.random_range(0..=lut.fan_in());
        let decoy = draw_decoy(&lut.table, &mut r);
        out.luts[idx] = keyed_lut(lut, j, position, obs_key.get(j), &decoy);
        key_positions.push(KeyPosition {
            lut: idx,
            input_index: position,
        });
    }
    let mut bs = ObfuscatedBitstream {
        netlist: out,
        key_len: targets.len(),
        key_positions,
    };
    bs.validate()?;
    // A decoy can differ from the original only on rows the circuit never
    // reaches or never observes; redraw those so every key bit matters.
    let key = obs_key.slice(0, targets.len());
    for (j, &idx) in targets.iter().enumerate() {
        let lut = &netlist.luts[idx];
        let position = bs.key_positions[j].input_index;
        let mut tries = 0;
        while flip_is_masked(&bs, &key, j, netlist, seed)? {
            if tries == MAX_DECOY_REDRAWS {
                warn!("key bit {j} (LUT {idx}) does not affect the outputs");
                break;
            }
            let decoy = draw_decoy(&lut.table, &mut r);
            bs.netlist.luts[idx] = keyed_lut(lut, j, position, key.get(j), &decoy);
            tries += 1;
        }
    }
    bs.validate()?;
    Ok(bs)
}

const MAX_DECOY_REDRAWS: usize = 32;
const MASK_CHECK_EXHAUSTIVE: usize = 12;
const MASK_CHECK_SAMPLES: usize = 4096;

fn draw_decoy(original: &Bits, r: &mut impl Rng) -> Bits {
    loop {
        let candidate: Bits = (0..original.len()).map(|_| r.random::<bool>()).collect();
        if &candidate != original {
            return candidate;
        }
    }
}

fn keyed_lut(lut: &Lut, j: usize, position: usize, correct: bool, decoy: &Bits) -> Lut {
    let k = lut.fan_in();
    let mut inputs = lut.inputs.clone();
    inputs.insert(position, Wire::Key(j));
    let table = (0..1usize << (k + 1))
        .map(|row| {
            let key_bit = row >> (k - position) & 1 == 1;
            // Drop the key column to index the original k-input table.
            let high = row >> (k + 1 - position) << (k - position);
            let low = row & ((1 << (k - position)) - 1);
            let inner = high | low;
            if key_bit == correct {
                lut.table.get(inner)
            } else {
                decoy.get(inner)
            }
        })
        .collect();
    Lut { inputs, table }
}

fn flip_is_masked(bs: &ObfuscatedBitstream, key: &Bits, j: usize, original: &LutNetlist, seed: u64) -> Result<bool> {
    let mut wrong = key.clone();
    wrong.flip(j);
    let m = if original.n_inputs <= MASK_CHECK_EXHAUSTIVE {
        functional_match(bs, &wrong, original)?
    } else {
        functional_match_sampled(bs, &wrong, original, MASK_CHECK_SAMPLES, seed)?
    };
    Ok(m == 1.0)
}

fn input_vector(n_inputs: usize, index: u64) -> Bits {
    (0..n_inputs).map(|i| index >> i & 1 == 1).collect()
}

/// Fraction of all primary-input vectors on which the keyed bitstream
/// agrees with `original`.
pub fn functional_match(bitstream: &ObfuscatedBitstream, key: &Bits, original: &LutNetlist) -> Result<f64> {
    check_interfaces(bitstream, original)?;
    if original.n_inputs > MAX_EXHAUSTIVE_INPUTS {
        return Err(Error::config(format!(
            "{} primary inputs is too many for exhaustive matching (max {MAX_EXHAUSTIVE_INPUTS}); \
             use functional_match_sampled",
            original.n_inputs
        )));
    }
    let total = 1u64 << original.n_inputs;
    let empty = Bits::new();
    let mut hits = 0u64;
    for index in 0..total {
        let x = input_vector(original.n_inputs, index);
        hits += (bitstream.evaluate(key, &x)? == original.evaluate(&empty, &x)?) as u64;
    }
    Ok(hits as f64 / total as f64)
}

/// Agreement over `samples` uniformly random input vectors.
pub fn functional_match_sampled(
    bitstream: &ObfuscatedBitstream,
    key: &Bits,
    original: &LutNetlist,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_interfaces(bitstream, original)?;
    if samples == 0 {
        return Err(Error::config("sampled matching needs at least one vector"));
    }
    let mut r = rng(seed);
    let empty = Bits::new();
    let mut hits = 0usize;
    for _ in 0..samples {
        let x: Bits = (0..original.n_inputs).map(|_| r.random::<bool>()).collect();
        hits += (bitstream.evaluate(key, &x)? == original.evaluate(&empty, &x)?) as usize;
    }
    Ok(hits as f64 / samples as f64)
}

fn check_interfaces(bitstream: &ObfuscatedBitstream, original: &LutNetlist) -> Result<()> {
    if bitstream.netlist.n_inputs != original.n_inputs {
        return Err(Error::SizeMismatch {
            what: "primary inputs",
            expected: original.n_inputs,
            actual: bitstream.netlist.n_inputs,
        });
    }
    if bitstream.netlist.n_outputs() != original.n_outputs() {
        return Err(Error::SizeMismatch {
            what: "primary outputs",
            expected: original.n_outputs(),
            actual: bitstream.netlist.n_outputs(),
        });
    }
    Ok(())
}

struct Builder {
    luts: Vec<Lut>,
}

impl Builder {
    fn lut(&mut self, inputs: Vec<Wire>, f: impl Fn(&[bool]) -> bool) -> Wire {
        self.luts.push(Lut::from_fn(inputs, f));
        Wire::Lut(self.luts.len() - 1)
    }

    fn half_adder(&mut self, a: Wire, b: Wire) -> (Wire, Wire) {
        let s = self.lut(vec![a, b], |v| v[0] ^ v[1]);
        let c = self.lut(vec![a, b], |v| v[0] & v[1]);
        (s, c)
    }

    fn full_adder(&mut self, a: Wire, b: Wire, cin: Wire) -> (Wire, Wire) {
        let s = self.lut(vec![a, b, cin], |v| v[0] ^ v[1] ^ v[2]);
        let c = self.lut(vec![a, b, cin], |v| (v[0] & v[1]) | (v[2] & (v[0] ^ v[1])));
        (s, c)
    }
}

/// 4-bit by 4-bit unsigned array multiplier on 4-input LUT fabric, every
/// LUT using at most three inputs.
///
/// Inputs `i0..i3` are `a` (LSB first), `i4..i7` are `b`; outputs are the
/// eight product bits LSB first. Mapping: sixteen 2-input AND LUTs form the
/// partial products `a_i b_j`; rows `j = 1..3` are added into the running
/// sum with a ripple of half adders (2-input XOR/AND LUTs) where a position
/// has only two operands and full adders (3-input XOR/majority LUTs)
/// elsewhere. 16 + 2*(4 + 8) = 40 LUTs.
pub fn sample_multiplier() -> LutNetlist {
    let mut b = Builder { luts: Vec::new() };
    let a_bit = |i: usize| Wire::Input(i);
    let b_bit = |j: usize| Wire::Input(4 + j);
    let mut pp = [[Wire::Input(0); 4]; 4];
    for (j, row) in pp.iter_mut().enumerate() {
        for (i, p) in row.iter_mut().enumerate() {
            *p = b.lut(vec![a_bit(i), b_bit(j)], |v| v[0] & v[1]);
        }
    }
    // acc[k] is the running sum bit of weight 2^k.
    let mut acc: Vec<Wire> = pp[0].to_vec();
    for (j, row) in pp.iter().enumerate().skip(1) {
        let mut carry: Option<Wire> = None;
        for (i, &p) in row.iter().enumerate() {
            let k = i + j;
            let (s, c) = match (acc.get(k).copied(), carry) {
                (Some(x), Some(cin)) => b.full_adder(x, p, cin),
                (Some(x), None) => b.half_adder(x, p),
                (None, Some(cin)) => b.half_adder(p, cin),
                (None, None) => unreachable!("every row overlaps the running sum"),
            };
            if k < acc.len() {
                acc[k] = s;
            } else {
                acc.push(s);
            }
            carry = Some(c);
        }
        acc.push(carry.expect("each row produces a carry"));
    }
    LutNetlist::new(4, 8, b.luts, acc).expect("multiplier mapping is well formed")
}

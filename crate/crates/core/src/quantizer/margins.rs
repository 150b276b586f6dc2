use serde::{Deserialize, Serialize};

use super::{QuantConfig, MAX_DEPTH};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::normal;

/// Distance a subject mean must keep from a threshold so that a Gaussian
/// of spread `sigma` crosses it with probability at most `beta`.
pub fn reliability_margin(sigma: f64, beta: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        sigma * normal::upper_quantile(beta)
    }
}

/// Equal-mass thresholds splitting the standard normal into `2^d` regions,
/// ascending. The negative half is the exact negation of the positive half.
pub fn thresholds(d: u8) -> Vec<f64> {
    let regions = 1usize << d;
    let half = regions / 2;
    let positive: Vec<f64> = (1..half)
        .map(|i| normal::upper_quantile((half - i) as f64 / regions as f64))
        .collect();
    let mut out: Vec<f64> = positive.iter().rev().map(|t| -t).collect();
    out.push(0.0);
    out.extend(positive);
    out
}

/// Gray code of a region index (0 = most negative), MSB first. The code of
/// region `r` at depth `d` is the prefix of the codes of regions `2r` and
/// `2r + 1` at depth `d + 1`.
pub fn gray_code(region: usize, d: u8) -> Bits {
    let g = region ^ (region >> 1);
    Bits::from_uint(g as u64, d as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMargin {
    /// Clearance kept from every threshold.
    pub margin: f64,
    /// Lower edge of the positive outermost usable interval.
    pub outer: f64,
    /// False when an inner region is narrower than twice the margin.
    pub feasible: bool,
}

/// Boundaries for one bit depth: the shared thresholds plus each feature's
/// margin and outer boundary. Only the positive side is stored; negative
/// boundaries are exact negations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSet {
    pub depth: u8,
    pub thresholds: Vec<f64>,
    pub features: Vec<FeatureMargin>,
}

impl MarginSet {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    fn positive_thresholds(&self) -> &[f64] {
        let half = self.thresholds.len() / 2;
        &self.thresholds[half + 1..]
    }

    /// Open usable intervals of the positive regions, innermost first; the
    /// last interval extends to +inf. Empty when the depth is infeasible.
    pub fn positive_intervals(&self, feature: usize) -> Vec<(f64, f64)> {
        let fm = &self.features[feature];
        if !fm.feasible {
            return Vec::new();
        }
        let pos = self.positive_thresholds();
        let mut edges = Vec::with_capacity(pos.len() + 1);
        edges.push(0.0);
        edges.extend_from_slice(pos);
        let mut out: Vec<(f64, f64)> = edges
            .windows(2)
            .map(|w| (w[0] + fm.margin, w[1] - fm.margin))
            .collect();
        out.push((fm.outer, f64::INFINITY));
        out
    }

    /// Usable intervals of all `2^d` regions in region order; the negative
    /// ones mirror the positive ones.
    pub fn intervals(&self, feature: usize) -> Vec<(f64, f64)> {
        let pos = self.positive_intervals(feature);
        let mut out: Vec<(f64, f64)> = pos.iter().rev().map(|&(lo, hi)| (-hi, -lo)).collect();
        out.extend(pos);
        out
    }

    /// Region index of `x` if it lies strictly inside a usable interval.
    pub fn reliable_region(&self, feature: usize, x: f64) -> Option<usize> {
        if x == 0.0 || !x.is_finite() {
            return None;
        }
        let half = self.thresholds.len().div_ceil(2);
        let a = x.abs();
        let j = self
            .positive_intervals(feature)
            .iter()
            .position(|&(lo, hi)| a > lo && a < hi)?;
        Some(if x > 0.0 { half + j } else { half - 1 - j })
    }
}

pub fn compute_margins(config: &QuantConfig, sigma: &[f64], d: u8) -> Result<MarginSet> {
    config.validate()?;
    if d == 0 || d > config.max_bits {
        return Err(Error::config(format!(
            "bit depth {d} outside 1..={}",
            config.max_bits
        )));
    }
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::config(format!("feature spread must be finite and >= 0, got {s}")));
    }
    let ts = thresholds(d);
    let pos: Vec<f64> = ts[ts.len() / 2 + 1..].to_vec();
    let features = sigma
        .iter()
        .map(|&s| feature_margin(config, &pos, reliability_margin(s, config.beta)))
        .collect();
    Ok(MarginSet {
        depth: d,
        thresholds: ts,
        features,
    })
}

/// Same solver as [`compute_margins`], fed with modeled per-feature noise.
pub fn na_margins(config: &QuantConfig, sigma_v: &[f64], d: u8) -> Result<MarginSet> {
    compute_margins(config, sigma_v, d)
}

fn feature_margin(config: &QuantConfig, pos: &[f64], m: f64) -> FeatureMargin {
    let mut edges = vec![0.0];
    edges.extend_from_slice(pos);
    let last = *edges.last().expect("edges start with 0");
    let inner: Vec<f64> = edges
        .windows(2)
        .map(|w| normal::mass(w[0] + m, w[1] - m))
        .collect();
    let feasible = edges.windows(2).all(|w| w[0] + m < w[1] - m);
    let outer = match inner.iter().copied().reduce(f64::min) {
        Some(u_min) if feasible => {
            let bound = config.alpha * u_min;
            let ratio_edge = if bound >= 0.5 {
                f64::NEG_INFINITY
            } else {
                normal::upper_quantile(bound)
            };
            (last + m).max(ratio_edge)
        }
        _ => last + m,
    };
    FeatureMargin {
        margin: m,
        outer,
        feasible,
    }
}

/// Margin sets for depths `1..=max_bits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginTable {
    pub sets: Vec<MarginSet>,
}

impl MarginTable {
    pub fn depth(&self, d: u8) -> Option<&MarginSet> {
        self.sets.iter().find(|s| s.depth == d)
    }

    pub fn max_depth(&self) -> u8 {
        self.sets.iter().map(|s| s.depth).max().unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.sets.first().map_or(0, MarginSet::dim)
    }

    /// Deepest depth at which `x` is reliable for `feature`, with its
    /// region index.
    pub fn best(&self, feature: usize, x: f64) -> Option<(u8, usize)> {
        self.sets
            .iter()
            .rev()
            .find_map(|s| s.reliable_region(feature, x).map(|r| (s.depth, r)))
    }
}

pub fn margin_table(config: &QuantConfig, sigma: &[f64]) -> Result<MarginTable> {
    config.validate()?;
    debug_assert!(config.max_bits <= MAX_DEPTH);
    let sets = (1..=config.max_bits)
        .map(|d| compute_margins(config, sigma, d))
        .collect::<Result<_>>()?;
    Ok(MarginTable { sets })
}

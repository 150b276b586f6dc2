//! Per-user feature quantization (IOMBA) and its noise-aware variant.
//!
//! Features are normalized against population statistics so each behaves
//! like a standard normal. At bit depth `d` the real line is cut into `2^d`
//! equal-mass regions. A subject's feature is usable at that depth only if
//! its mean sits far enough inside a region that the subject's own noise
//! distribution crosses the nearest threshold with probability at most
//! `beta`, and, for the outermost regions, far enough out that the usable
//! tail mass does not exceed `alpha` times the smallest inner usable mass.
//! Each feature gets the deepest usable depth and contributes the Gray code
//! of its region.
//!
//! IOMBA sizes margins from the worst enrollment spread seen in the
//! population; NA-IOMBA sizes them from a per-feature noise model.

mod keygen;
mod margins;
mod metrics;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use keygen::{
    attach_ecc, enroll_from_stats, enroll_subject, quantize_value, regenerate_from_readings,
    regenerate_key, regenerate_raw, BioKey, HelperData, HELPER_VERSION,
};
pub use margins::{
    compute_margins, gray_code, margin_table, na_margins, reliability_margin, thresholds,
    FeatureMargin, MarginSet, MarginTable,
};
pub use metrics::{
    aligned_bits, min_entropy, reliability, subject_metrics, BitPosition, MinEntropyReport,
    SubjectMetrics, MIN_CONTRIBUTORS,
};
pub use stats::{
    population_stats, subject_stats, worst_case_sigma, FeatureStats, GaussianityScreen,
    PopulationStats, SubjectStats, SIGMA_FLOOR,
};

/// Largest supported bits per feature.
pub const MAX_DEPTH: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantConfig {
    /// Bound on outer-to-inner usable region mass.
    pub alpha: f64,
    /// Bound on the subject's tail mass beyond the nearest threshold.
    pub beta: f64,
    pub max_bits: u8,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig {
            alpha: 1.0,
            beta: 1e-3,
            max_bits: 3,
        }
    }
}

impl QuantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::config(format!("beta must lie in (0, 0.5), got {}", self.beta)));
        }
        if !(1..=MAX_DEPTH).contains(&self.max_bits) {
            return Err(Error::config(format!(
                "max_bits must lie in 1..={MAX_DEPTH}, got {}",
                self.max_bits
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        QuantConfig::default().validate().unwrap();
        for bad in [
            QuantConfig { alpha: 0.0, ..Default::default() },
            QuantConfig { alpha: 1.5, ..Default::default() },
            QuantConfig { beta: 0.5, ..Default::default() },
            QuantConfig { max_bits: 0, ..Default::default() },
            QuantConfig { max_bits: 4, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}

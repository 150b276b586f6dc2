//! Noise-aware biometric key generation bound to a simulated strong PUF.
//!
//! The crate is organized by subsystem:
//!
//! - [`sigproc`]: ECG filtering, R-peak detection, beat segmentation and
//!   normalize-convolve-normalize feature extraction.
//! - [`synthecg`]: dynamical-model ECG synthesis, structured noise and
//!   stress scaling.
//! - [`quantizer`]: per-user interval-optimized feature quantization, the
//!   noise-aware margin variant, and key-quality metrics.
//! - [`ecc`]: repetition-code fuzzy commitment.
//! - [`pufsim`]: arbiter PUF, CRP collection, designer-side model training
//!   and hash-based challenge expansion.
//! - [`locknet`]: LUT netlists and key-dependent bitstream obfuscation.
//! - [`protocol`]: the enrollment / ownership / customization /
//!   authentication flow between user, device and designer.
//! - [`bench`]: sweep orchestration and report emission for the CLI.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bits;
pub mod ecc;
pub mod error;
pub mod locknet;
pub mod normal;
pub mod protocol;
pub mod pufsim;
pub mod quantizer;
pub mod rng;
pub mod sigproc;
pub mod synthecg;

pub use bits::Bits;
pub use error::{Error, Result};

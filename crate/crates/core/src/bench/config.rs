use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use super::cohort::Arm;
use crate::protocol::ProtocolConfig;
use crate::quantizer::{GaussianityScreen, QuantConfig};
use crate::sigproc::PipelineConfig;
use crate::synthecg::{McSharryParams, NoiseKind, StressTarget, WaveGroup};

pub const CONFIG_VERSION: u32 = 1;

/// Everything an experiment run depends on. Every field has a default, so
/// a config file only needs to name what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    /// Regeneration trials per subject and condition.
    pub trials: usize,
    pub population: PopulationConfig,
    pub enrollment: EnrollmentConfig,
    pub regeneration: RegenerationConfig,
    pub pipeline: PipelineConfig,
    pub quantizer: QuantConfig,
    pub screen: GaussianityScreen,
    pub noise: NoiseSweepConfig,
    pub na_model: NaModelConfig,
    pub stress: StressConfig,
    pub ecc: EccConfig,
    pub protocol: ProtocolRunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 2024,
            trials: 50,
            population: PopulationConfig::default(),
            enrollment: EnrollmentConfig::default(),
            regeneration: RegenerationConfig::default(),
            pipeline: PipelineConfig::default(),
            quantizer: QuantConfig::default(),
            screen: GaussianityScreen::default(),
            noise: NoiseSweepConfig::default(),
            na_model: NaModelConfig::default(),
            stress: StressConfig::default(),
            ecc: EccConfig::default(),
            protocol: ProtocolRunConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n: usize,
    pub jitter: f64,
    pub base: McSharryParams,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            n: 30,
            jitter: 0.1,
            base: McSharryParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrollmentConfig {
    /// Single-beat samples per subject.
    pub beats: usize,
    pub noise: NoiseKind,
    pub snr_db: f64,
}

impl Default for EnrollmentConfig {
    fn default() -> Self {
        EnrollmentConfig {
            beats: 20,
            noise: NoiseKind::Mixed,
            snr_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegenerationConfig {
    /// Length of each verification recording; its beats are averaged.
    pub duration_s: f64,
}

impl Default for RegenerationConfig {
    fn default() -> Self {
        RegenerationConfig { duration_s: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub kinds: Vec<NoiseKind>,
    pub snr_db: Vec<f64>,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        NoiseSweepConfig {
            kinds: NoiseKind::ALL.to_vec(),
            snr_db: vec![30.0, 20.0, 10.0, 5.0, 0.0, -5.0],
        }
    }
}

/// Where the noise-aware arm takes its per-feature spread from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    /// Simulated recordings of each subject's own model at the model SNR,
    /// pushed through the pipeline.
    Synthetic,
    /// The enrollment spread, i.e. the same input IOMBA uses.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaModelConfig {
    pub source: SigmaSource,
    pub kind: NoiseKind,
    pub snr_db: f64,
    /// Simulated recordings per subject.
    pub recordings: usize,
    /// Run the noise-aware arm without the bandpass filter.
    pub skip_denoise: bool,
}

impl Default for NaModelConfig {
    fn default() -> Self {
        NaModelConfig {
            source: SigmaSource::Synthetic,
            kind: NoiseKind::Mixed,
            snr_db: 5.0,
            recordings: 20,
            skip_denoise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressConfig {
    pub scales: Vec<f64>,
    /// Scale the noise-aware arm models when re-optimizing margins.
    pub model_scale: f64,
    pub targets: Vec<StressTarget>,
    pub groups: Vec<WaveGroup>,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            scales: vec![0.9, 0.8, 0.7, 0.6, 0.5],
            model_scale: 0.7,
            targets: StressTarget::ALL.to_vec(),
            groups: WaveGroup::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccConfig {
    /// Repetition length; 1 disables correction.
    pub n: usize,
}

impl Default for EccConfig {
    fn default() -> Self {
        EccConfig { n: 1 }
    }
}

/// End-to-end protocol run: `owners` devices are enrolled and claimed,
/// plus one spare device for cross-device attempts. Each of `attempts`
/// rounds makes one genuine, one impostor and one cross-device attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolRunConfig {
    pub device: ProtocolConfig,
    pub arm: Arm,
    pub owners: usize,
    pub attempts: usize,
    pub noise: NoiseKind,
    pub snr_db: f64,
}

impl Default for ProtocolRunConfig {
    fn default() -> Self {
        ProtocolRunConfig {
            device: ProtocolConfig::default(),
            arm: Arm::NaIomba,
            owners: 3,
            attempts: 50,
            noise: NoiseKind::Mixed,
            snr_db: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be positive"));
        }
        if self.population.n < 2 {
            return Err(Error::config("population needs at least 2 subjects"));
        }
        if self.enrollment.beats < 2 {
            return Err(Error::config("enrollment needs at least 2 beats"));
        }
        if !(self.regeneration.duration_s >= 2.0) {
            return Err(Error::config("regeneration recordings must last at least 2 s"));
        }
        if self.na_model.recordings < 2 {
            return Err(Error::config("the noise model needs at least 2 recordings"));
        }
        if self.ecc.n == 0 || self.ecc.n.is_multiple_of(2) {
            return Err(Error::config("ECC repetition length must be odd"));
        }
        if self.protocol.owners == 0 || self.protocol.attempts == 0 {
            return Err(Error::config("the protocol run needs owners and attempts"));
        }
        if self.protocol.owners + 1 >= self.population.n {
            return Err(Error::config("the protocol run needs subjects left over as impostors"));
        }
        self.protocol.device.validate()?;
        self.population.base.validate()?;
        self.pipeline.validate(self.population.base.fs)?;
        self.quantizer.validate()?;
        let scales = self.stress.scales.iter().chain([&self.stress.model_scale]);
        for s in scales {
            if !(0.5..=1.0).contains(s) {
                return Err(Error::config(format!("stress scale {s} outside [0.5, 1.0]")));
            }
        }
        Ok(())
    }
}

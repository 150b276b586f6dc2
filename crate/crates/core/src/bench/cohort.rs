//! Synthetic subjects, their recordings, and per-arm enrollment.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SigmaSource};
use crate::ecc::CodeSpec;
use crate::error::{Error, Result};
use crate::quantizer::{
    attach_ecc, enroll_from_stats, margin_table, min_entropy, na_margins, population_stats,
    subject_stats, worst_case_sigma, BioKey, HelperData, MarginTable, MinEntropyReport,
    PopulationStats, SubjectStats, MIN_CONTRIBUTORS, SIGMA_FLOOR,
};
use crate::rng::derive_seed;
use crate::sigproc::{beat_features, recording_features, FeatureVector, PipelineConfig, RawSignal};
use crate::synthecg::{
    add_noise, apply_stress, generate_ecg, sample_population, McSharryParams, NoiseKind, NoiseSpec,
    StressScale, StressTarget, WaveGroup,
};

pub(crate) const TAG_POPULATION: u64 = 1;
pub(crate) const TAG_ENROLL: u64 = 2;
pub(crate) const TAG_MODEL: u64 = 3;
pub(crate) const TAG_TRIAL: u64 = 4;
pub(crate) const TAG_STRESS_MODEL: u64 = 5;
pub(crate) const TAG_ECC: u64 = 6;
pub(crate) const TAG_DEVICE: u64 = 7;
pub(crate) const TAG_AUTH: u64 = 8;
pub(crate) const TAG_PROTOCOL: u64 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Worst-case enrollment spread, bandpass-filtered pipeline.
    Iomba,
    /// Worst-case enrollment spread, no bandpass filter.
    IombaRaw,
    /// Modeled per-subject spread.
    NaIomba,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Iomba => "iomba",
            Arm::IombaRaw => "iomba_raw",
            Arm::NaIomba => "na_iomba",
        }
    }

    pub fn pipeline(self, cfg: &ExperimentConfig) -> PipelineConfig {
        let denoise = match self {
            Arm::Iomba => true,
            Arm::IombaRaw => false,
            Arm::NaIomba => !cfg.na_model.skip_denoise,
        };
        PipelineConfig {
            denoise,
            ..cfg.pipeline.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub index: usize,
    pub params: McSharryParams,
}

pub fn subjects(cfg: &ExperimentConfig) -> Result<Vec<Subject>> {
    let params = sample_population(
        &cfg.population.base,
        cfg.population.n,
        cfg.population.jitter,
        derive_seed(cfg.seed, &[TAG_POPULATION]),
    )?;
    Ok(params
        .into_iter()
        .enumerate()
        .map(|(index, params)| Subject {
            id: format!("S{index:03}"),
            index,
            params,
        })
        .collect())
}

/// A model recording, optionally corrupted by noise at a given SNR. The
/// seed fixes both the cardiac phase and the noise.
pub fn record(
    params: &McSharryParams,
    duration_s: f64,
    noise: Option<(NoiseKind, f64)>,
    seed: u64,
) -> Result<RawSignal> {
    let clean = generate_ecg(params, duration_s, derive_seed(seed, &[0]))?;
    match noise {
        None => Ok(clean),
        Some((kind, snr_db)) => add_noise(
            &clean,
            &NoiseSpec {
                kind,
                snr_db,
                seed: derive_seed(seed, &[1]),
            },
        ),
    }
}

/// The subject's enrollment recording, long enough for the configured
/// number of beats plus slack for edge beats.
pub fn enrollment_recording(cfg: &ExperimentConfig, subject: &Subject) -> Result<RawSignal> {
    let rr = 60.0 / subject.params.hr_bpm;
    let duration = ((cfg.enrollment.beats + 4) as f64 * rr + 1.0).max(2.0);
    record(
        &subject.params,
        duration,
        Some((cfg.enrollment.noise, cfg.enrollment.snr_db)),
        derive_seed(cfg.seed, &[TAG_ENROLL, subject.index as u64]),
    )
}

/// Single-beat feature vectors from the subject's enrollment recording.
pub fn enrollment_features(
    cfg: &ExperimentConfig,
    subject: &Subject,
    pipeline: &PipelineConfig,
) -> Result<Vec<FeatureVector>> {
    let signal = enrollment_recording(cfg, subject)?;
    let mut beats = beat_features(&signal, pipeline)?;
    if beats.len() < cfg.enrollment.beats {
        return Err(Error::Enrollment(format!(
            "{}: only {} usable enrollment beats, need {}",
            subject.id,
            beats.len(),
            cfg.enrollment.beats
        )));
    }
    beats.truncate(cfg.enrollment.beats);
    beats.iter_mut().for_each(|b| b.subject_id = subject.id.clone());
    Ok(beats)
}

/// Beat-averaged features of one verification recording.
pub fn verification_sample(
    cfg: &ExperimentConfig,
    params: &McSharryParams,
    pipeline: &PipelineConfig,
    noise: Option<(NoiseKind, f64)>,
    seed: u64,
) -> Result<Option<FeatureVector>> {
    let signal = record(params, cfg.regeneration.duration_s, noise, seed)?;
    recording_features(&signal, pipeline)
}

/// How the noise-aware arm estimates per-feature spread.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Enrollment spread (IOMBA's input).
    Measured,
    /// Simulated noisy recordings of the subject's own model.
    Synthetic {
        kind: NoiseKind,
        snr_db: f64,
        recordings: usize,
    },
    /// Deviation of stressed recordings from the enrolled template.
    Stress {
        scale: f64,
        targets: Vec<StressTarget>,
        groups: Vec<WaveGroup>,
    },
}

impl NoiseModel {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        match cfg.na_model.source {
            SigmaSource::Measured => NoiseModel::Measured,
            SigmaSource::Synthetic => NoiseModel::Synthetic {
                kind: cfg.na_model.kind,
                snr_db: cfg.na_model.snr_db,
                recordings: cfg.na_model.recordings,
            },
        }
    }

    pub fn stress(cfg: &ExperimentConfig) -> Self {
        NoiseModel::Stress {
            scale: cfg.stress.model_scale,
            targets: cfg.stress.targets.clone(),
            groups: cfg.stress.groups.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Enrolled {
    pub key: BioKey,
    pub helper: HelperData,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub subject: Subject,
    pub stats: Option<SubjectStats>,
    /// Spread the margins were solved for.
    pub sigma: Vec<f64>,
    pub enrolled: Option<Enrolled>,
    pub failure: Option<String>,
}

/// One arm's enrollment of the whole population.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub arm: Arm,
    pub pipeline: PipelineConfig,
    pub pop: PopulationStats,
    pub members: Vec<Member>,
    pub entropy: Option<MinEntropyReport>,
}

impl Cohort {
    pub fn enrolled_count(&self) -> usize {
        self.members.iter().filter(|m| m.enrolled.is_some()).count()
    }
}

/// Enrolls every subject under `arm`. IOMBA arms share one margin table
/// solved from the population's worst enrollment spread; the noise-aware
/// arm solves one table per subject from `model`.
pub fn enroll_cohort(
    cfg: &ExperimentConfig,
    subjects: &[Subject],
    arm: Arm,
    model: &NoiseModel,
) -> Result<Cohort> {
    cfg.validate()?;
    let pipeline = arm.pipeline(cfg);
    let features: Vec<Result<Vec<FeatureVector>>> = subjects
        .par_iter()
        .map(|s| enrollment_features(cfg, s, &pipeline))
        .collect();
    let usable: Vec<Vec<FeatureVector>> = features
        .iter()
        .filter_map(|f| f.as_ref().ok().cloned())
        .collect();
    let pop = population_stats(&usable, &cfg.screen)?;
    debug!(
        "{}: {} of {} features pass the Gaussianity screen",
        arm.label(),
        pop.retained_count(),
        pop.dim()
    );
    let stats: Vec<Result<SubjectStats>> = features
        .iter()
        .map(|f| match f {
            Ok(beats) => subject_stats(beats, &pop),
            Err(e) => Err(Error::Enrollment(e.to_string())),
        })
        .collect();
    let ok_stats: Vec<SubjectStats> = stats.iter().filter_map(|s| s.as_ref().ok().cloned()).collect();
    let worst = worst_case_sigma(&ok_stats)?;
    let shared = margin_table(&cfg.quantizer, &worst)?;
    let ecc = if cfg.ecc.n > 1 {
        Some(CodeSpec::repetition(cfg.ecc.n)?)
    } else {
        None
    };

    let members: Vec<Member> = subjects
        .par_iter()
        .zip(stats.into_par_iter())
        .map(|(subject, stats)| {
            let stats = match stats {
                Ok(s) => s,
                Err(e) => {
                    warn!("{}: {e}", subject.id);
                    return Member {
                        subject: subject.clone(),
                        stats: None,
                        sigma: Vec::new(),
                        enrolled: None,
                        failure: Some(e.to_string()),
                    };
                }
            };
            let attempt = (|| -> Result<(Vec<f64>, Enrolled)> {
                let (sigma, table) = match (arm, model) {
                    (Arm::NaIomba, m) if *m != NoiseModel::Measured => {
                        let sigma = model_sigma(cfg, subject, &pipeline, &pop, &stats, m)?;
                        let sets = (1..=cfg.quantizer.max_bits)
                            .map(|d| na_margins(&cfg.quantizer, &sigma, d))
                            .collect::<Result<Vec<_>>>()?;
                        (sigma, MarginTable { sets })
                    }
                    _ => (worst.clone(), shared.clone()),
                };
                let (key, mut helper) = enroll_from_stats(&stats, &pop, &table)?;
                if let Some(spec) = ecc {
                    helper = attach_ecc(
                        &helper,
                        &key,
                        spec,
                        derive_seed(cfg.seed, &[TAG_ECC, subject.index as u64]),
                    )?;
                }
                Ok((sigma, Enrolled { key, helper }))
            })();
            match attempt {
                Ok((sigma, enrolled)) => Member {
                    subject: subject.clone(),
                    stats: Some(stats),
                    sigma,
                    enrolled: Some(enrolled),
                    failure: None,
                },
                Err(e) => {
                    warn!("{} ({}): {e}", subject.id, arm.label());
                    Member {
                        subject: subject.clone(),
                        stats: Some(stats),
                        sigma: Vec::new(),
                        enrolled: None,
                        failure: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let keyed: Vec<(&BioKey, &HelperData)> = members
        .iter()
        .filter_map(|m| m.enrolled.as_ref().map(|e| (&e.key, &e.helper)))
        .collect();
    let entropy = match min_entropy(&keyed, MIN_CONTRIBUTORS) {
        Ok(r) => Some(r),
        Err(Error::Degenerate(msg)) => {
            warn!("{}: {msg}", arm.label());
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Cohort {
        arm,
        pipeline,
        pop,
        members,
        entropy,
    })
}

/// Root-mean-square deviation of modeled recordings from the enrolled
/// mean, per feature, in the normalized domain.
fn model_sigma(
    cfg: &ExperimentConfig,
    subject: &Subject,
    pipeline: &PipelineConfig,
    pop: &PopulationStats,
    stats: &SubjectStats,
    model: &NoiseModel,
) -> Result<Vec<f64>> {
    let base = derive_seed(cfg.seed, &[subject.index as u64]);
    let samples: Vec<FeatureVector> = match model {
        NoiseModel::Measured => return Ok(stats.sigma.clone()),
        NoiseModel::Synthetic {
            kind,
            snr_db,
            recordings,
        } => (0..*recordings)
            .map(|r| {
                verification_sample(
                    cfg,
                    &subject.params,
                    pipeline,
                    Some((*kind, *snr_db)),
                    derive_seed(base, &[TAG_MODEL, r as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect(),
        NoiseModel::Stress {
            scale,
            targets,
            groups,
        } => {
            let mut out = Vec::new();
            for (t, &target) in targets.iter().enumerate() {
                for (g, &group) in groups.iter().enumerate() {
                    let stressed =
                        apply_stress(&subject.params, &StressScale::on_group(target, group, *scale))?;
                    let sample = verification_sample(
                        cfg,
                        &stressed,
                        pipeline,
                        Some((cfg.enrollment.noise, cfg.enrollment.snr_db)),
                        derive_seed(base, &[TAG_STRESS_MODEL, t as u64, g as u64]),
                    )?;
                    out.extend(sample);
                }
            }
            out
        }
    };
    if samples.is_empty() {
        return Err(Error::Enrollment(format!(
            "{}: no modeled recording produced a usable beat",
            subject.id
        )));
    }
    let n = samples.len() as f64;
    let mut acc = vec![0.0; pop.dim()];
    for s in &samples {
        let x = pop.normalize(s)?;
        acc.iter_mut()
            .zip(x.iter().zip(&stats.mu))
            .for_each(|(a, (v, m))| *a += (v - m).powi(2) / n);
    }
    Ok(acc.into_iter().map(|v| v.sqrt().max(SIGMA_FLOOR)).collect())
}

//! Regeneration sweeps over noise and stress conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::{
    enroll_cohort, subjects, verification_sample, Arm, Cohort, NoiseModel, Subject, TAG_TRIAL,
};
use super::config::ExperimentConfig;
use super::report::ReportRow;
use crate::error::Result;
use crate::quantizer::{regenerate_from_readings, subject_metrics, BioKey};
use crate::rng::derive_seed;
use crate::sigproc::{FeatureVector, PipelineConfig};
use crate::synthecg::{apply_stress, NoiseKind, StressScale, StressTarget, WaveGroup};

/// Verification condition for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    Clean,
    Noise {
        kind: NoiseKind,
        snr_db: f64,
    },
    Stress {
        target: StressTarget,
        group: WaveGroup,
        scale: f64,
    },
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Clean => "clean".into(),
            Condition::Noise { kind, snr_db } => format!("{}@{snr_db}dB", kind.label()),
            Condition::Stress {
                target,
                group,
                scale,
            } => format!("{}/{}@{scale}", target.label(), group.label()),
        }
    }

    /// The swept quantity: SNR for noise, scale for stress.
    pub fn value(&self) -> Option<f64> {
        match self {
            Condition::Clean => None,
            Condition::Noise { snr_db, .. } => Some(*snr_db),
            Condition::Stress { scale, .. } => Some(*scale),
        }
    }

    /// Series the condition belongs to when plotted against `value`.
    pub fn series(&self) -> String {
        match self {
            Condition::Clean => "clean".into(),
            Condition::Noise { kind, .. } => kind.label().into(),
            Condition::Stress { target, group, .. } => format!("{}/{}", target.label(), group.label()),
        }
    }

    fn seed_labels(&self) -> Vec<u64> {
        match self {
            Condition::Clean => vec![0],
            Condition::Noise { kind, snr_db } => vec![1, *kind as u64, snr_db.to_bits()],
            Condition::Stress {
                target,
                group,
                scale,
            } => vec![2, *target as u64, *group as u64, scale.to_bits()],
        }
    }
}

/// Readings for every subject and trial under one condition; `None` where
/// the recording produced no usable beat.
type Readings = Vec<Vec<Option<Vec<FeatureVector>>>>;

fn collect_readings(
    cfg: &ExperimentConfig,
    subjects: &[Subject],
    pipeline: &PipelineConfig,
    condition: &Condition,
) -> Result<Readings> {
    let per_trial = cfg.ecc.n;
    subjects
        .par_iter()
        .map(|s| {
            let params = match condition {
                Condition::Stress {
                    target,
                    group,
                    scale,
                } => apply_stress(&s.params, &StressScale::on_group(*target, *group, *scale))?,
                _ => s.params.clone(),
            };
            let noise = match condition {
                Condition::Clean => None,
                Condition::Noise { kind, snr_db } => Some((*kind, *snr_db)),
                Condition::Stress { .. } => Some((cfg.enrollment.noise, cfg.enrollment.snr_db)),
            };
            let mut labels = vec![TAG_TRIAL];
            labels.extend(condition.seed_labels());
            labels.push(s.index as u64);
            let base = derive_seed(cfg.seed, &labels);
            (0..cfg.trials)
                .map(|t| {
                    let readings = (0..per_trial)
                        .map(|r| {
                            verification_sample(
                                cfg,
                                &params,
                                pipeline,
                                noise,
                                derive_seed(base, &[t as u64, r as u64]),
                            )
                        })
                        .collect::<Result<Option<Vec<_>>>>()?;
                    Ok(readings)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Per-subject rows for one arm under one condition. A trial whose
/// recording yields no beat counts as reliability 0.
fn evaluate(
    experiment: &str,
    cohort: &Cohort,
    condition: &Condition,
    readings: &Readings,
) -> Result<Vec<ReportRow>> {
    cohort
        .members
        .iter()
        .zip(readings)
        .map(|(m, trials)| {
            let mut row = ReportRow::new(experiment, cohort.arm, condition, &m.subject.id);
            let Some(enrolled) = &m.enrolled else {
                row.status = "enroll_failed".into();
                return Ok(row);
            };
            let mut regenerated = Vec::with_capacity(trials.len());
            let mut missing = 0usize;
            for t in trials {
                match t {
                    Some(r) => regenerated.push(regenerate_from_readings(r, &enrolled.helper)?),
                    None => missing += 1,
                }
            }
            let metrics = match &cohort.entropy {
                Some(e) if !regenerated.is_empty() => Some(subject_metrics(
                    &m.subject.id,
                    &enrolled.key,
                    &enrolled.helper,
                    &regenerated,
                    e,
                )?),
                _ => None,
            };
            let n = trials.len() as f64;
            let hits = if regenerated.is_empty() {
                0.0
            } else {
                crate::quantizer::reliability(&enrolled.key, &regenerated)? * regenerated.len() as f64
            };
            row.key_len = enrolled.key.len();
            row.reliability = hits / n;
            row.exact_fraction = regenerated.iter().filter(|k| **k == enrolled.key).count() as f64 / n;
            if let Some(mx) = metrics {
                row.min_entropy_mean = mx.min_entropy_mean;
                row.min_entropy_min = mx.min_entropy_min;
                row.min_entropy_max = mx.min_entropy_max;
            }
            if missing > 0 {
                row.status = format!("missing_{missing}");
            }
            Ok(row)
        })
        .collect()
}

/// Runs every condition against every cohort, sharing recordings between
/// cohorts that use the same pipeline.
pub fn run_conditions(
    experiment: &str,
    cfg: &ExperimentConfig,
    subjects: &[Subject],
    cohorts: &[Cohort],
    conditions: &[Condition],
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for condition in conditions {
        let mut cache: Vec<(bool, Readings)> = Vec::new();
        for cohort in cohorts {
            let denoise = cohort.pipeline.denoise;
            if !cache.iter().any(|(d, _)| *d == denoise) {
                cache.push((denoise, collect_readings(cfg, subjects, &cohort.pipeline, condition)?));
            }
            let readings = &cache.iter().find(|(d, _)| *d == denoise).expect("cached").1;
            rows.extend(evaluate(experiment, cohort, condition, readings)?);
        }
    }
    Ok(rows)
}

pub fn snr_conditions(cfg: &ExperimentConfig) -> Vec<Condition> {
    let mut out = vec![Condition::Clean];
    for &kind in &cfg.noise.kinds {
        for &snr_db in &cfg.noise.snr_db {
            out.push(Condition::Noise { kind, snr_db });
        }
    }
    out
}

pub fn stress_conditions(cfg: &ExperimentConfig) -> Vec<Condition> {
    let mut out = Vec::new();
    for &target in &cfg.stress.targets {
        for &group in &cfg.stress.groups {
            for &scale in &cfg.stress.scales {
                out.push(Condition::Stress {
                    target,
                    group,
                    scale,
                });
            }
        }
    }
    out
}

/// Noise sweep: IOMBA without and with the bandpass filter, and the
/// noise-aware arm with margins from the configured noise model.
pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let subjects = subjects(cfg)?;
    let model = NoiseModel::from_config(cfg);
    let cohorts = [Arm::IombaRaw, Arm::Iomba, Arm::NaIomba]
        .into_iter()
        .map(|arm| enroll_cohort(cfg, &subjects, arm, &model))
        .collect::<Result<Vec<_>>>()?;
    run_conditions("snr", cfg, &subjects, &cohorts, &snr_conditions(cfg))
}

/// Stress sweep: IOMBA against the noise-aware arm re-optimized for
/// stress at the configured model scale.
pub fn run_stress_sweep(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let subjects = subjects(cfg)?;
    let cohorts = vec![
        enroll_cohort(cfg, &subjects, Arm::Iomba, &NoiseModel::Measured)?,
        enroll_cohort(cfg, &subjects, Arm::NaIomba, &NoiseModel::stress(cfg))?,
    ];
    run_conditions("stress", cfg, &subjects, &cohorts, &stress_conditions(cfg))
}

/// Enrollment keys of every subject and arm, for inspection.
pub fn enrolled_keys(cohort: &Cohort) -> Vec<(String, Option<BioKey>)> {
    cohort
        .members
        .iter()
        .map(|m| (m.subject.id.clone(), m.enrolled.as_ref().map(|e| e.key.clone())))
        .collect()
}

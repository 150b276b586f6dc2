use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigproc::FeatureVector;

/// Lower bound on any subject's per-feature spread.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Moment bounds a feature must meet to count as Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianityScreen {
    pub max_abs_skew: f64,
    pub max_abs_excess_kurtosis: f64,
}

impl Default for GaussianityScreen {
    fn default() -> Self {
        GaussianityScreen {
            max_abs_skew: 1.0,
            max_abs_excess_kurtosis: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    pub gaussian: bool,
    pub zero_variance: bool,
}

impl FeatureStats {
    /// Usable for key bits.
    pub fn retained(&self) -> bool {
        self.gaussian && !self.zero_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub features: Vec<FeatureStats>,
}

impl PopulationStats {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn retained_count(&self) -> usize {
        self.features.iter().filter(|f| f.retained()).count()
    }

    /// Maps a sample into the population's standard-normal domain. Features
    /// with zero variance map to 0.
    pub fn normalize(&self, sample: &FeatureVector) -> Result<Vec<f64>> {
        normalize_with(
            sample,
            self.features.iter().map(|f| (f.mean, f.std)),
            self.dim(),
        )
    }

    pub fn normalization(&self) -> Vec<(f64, f64)> {
        self.features.iter().map(|f| (f.mean, f.std)).collect()
    }
}

pub(crate) fn normalize_with(
    sample: &FeatureVector,
    params: impl Iterator<Item = (f64, f64)>,
    dim: usize,
) -> Result<Vec<f64>> {
    if sample.dim() != dim {
        return Err(Error::SizeMismatch {
            what: "feature dimension",
            expected: dim,
            actual: sample.dim(),
        });
    }
    Ok(sample
        .values
        .iter()
        .zip(params)
        .map(|(x, (m, s))| if s > 0.0 { (x - m) / s } else { 0.0 })
        .collect())
}

/// Per-feature moments over every sample of every subject.
pub fn population_stats(
    subjects: &[Vec<FeatureVector>],
    screen: &GaussianityScreen,
) -> Result<PopulationStats> {
    if subjects.len() < 2 {
        return Err(Error::config(format!(
            "population statistics need at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let dim = subjects[0]
        .first()
        .map(FeatureVector::dim)
        .ok_or_else(|| Error::config("every subject needs at least 2 samples"))?;
    for s in subjects {
        if s.len() < 2 {
            return Err(Error::config(format!(
                "every subject needs at least 2 samples, got {}",
                s.len()
            )));
        }
        if let Some(v) = s.iter().find(|v| v.dim() != dim) {
            return Err(Error::SizeMismatch {
                what: "feature dimension",
                expected: dim,
                actual: v.dim(),
            });
        }
    }
    let all: Vec<&FeatureVector> = subjects.iter().flatten().collect();
    let features = (0..dim)
        .map(|k| {
            let column: Vec<f64> = all.iter().map(|v| v.values[k]).collect();
            column_stats(&column, screen)
        })
        .collect();
    Ok(PopulationStats { features })
}

fn column_stats(x: &[f64], screen: &GaussianityScreen) -> FeatureStats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = (m2 * n / (n - 1.0)).sqrt();
    let scale = mean.abs().max(1.0);
    if !(std > 1e-12 * scale) {
        return FeatureStats {
            mean,
            std: 0.0,
            skew: 0.0,
            excess_kurtosis: 0.0,
            gaussian: false,
            zero_variance: true,
        };
    }
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    FeatureStats {
        mean,
        std,
        skew,
        excess_kurtosis,
        gaussian: skew.abs() < screen.max_abs_skew
            && excess_kurtosis.abs() < screen.max_abs_excess_kurtosis,
        zero_variance: false,
    }
}

/// A subject's normalized-domain feature mean and spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SubjectStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Mean and unbiased spread of the normalized samples, with the spread
/// floored at [`SIGMA_FLOOR`].
pub fn subject_stats(samples: &[FeatureVector], pop: &PopulationStats) -> Result<SubjectStats> {
    if samples.len() < 2 {
        return Err(Error::Enrollment(format!(
            "at least 2 enrollment samples are required, got {}",
            samples.len()
        )));
    }
    let normalized = samples
        .iter()
        .map(|s| pop.normalize(s))
        .collect::<Result<Vec<_>>>()?;
    let n = normalized.len() as f64;
    let dim = pop.dim();
    let mut mu = vec![0.0; dim];
    for row in &normalized {
        mu.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; dim];
    for row in &normalized {
        var.iter_mut()
            .zip(row.iter().zip(&mu))
            .for_each(|(s, (v, m))| *s += (v - m).powi(2) / (n - 1.0));
    }
    let sigma = var.into_iter().map(|v| v.sqrt().max(SIGMA_FLOOR)).collect();
    Ok(SubjectStats { mu, sigma })
}

/// Per-feature maximum spread across subjects; IOMBA's margin input.
pub fn worst_case_sigma(subjects: &[SubjectStats]) -> Result<Vec<f64>> {
    let first = subjects
        .first()
        .ok_or_else(|| Error::config("no subject statistics given"))?;
    let mut out = first.sigma.clone();
    for s in &subjects[1..] {
        if s.dim() != out.len() {
            return Err(Error::SizeMismatch {
                what: "subject statistics dimension",
                expected: out.len(),
                actual: s.dim(),
            });
        }
        out.iter_mut().zip(&s.sigma).for_each(|(o, v)| *o = o.max(*v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn subjects_from_column(column: &[f64], per_subject: usize) -> Vec<Vec<FeatureVector>> {
        column
            .chunks(per_subject)
            .map(|c| c.iter().map(|&v| FeatureVector::new(vec![v], "s")).collect())
            .collect()
    }

    #[test]
    fn gaussian_column_moments() {
        let mut r = rng(1);
        let d = Normal::new(5.0, 2.0).unwrap();
        let col: Vec<f64> = (0..1000).map(|_| d.sample(&mut r)).collect();
        let pop = population_stats(&subjects_from_column(&col, 10), &Default::default()).unwrap();
        let f = pop.features[0];
        assert!((f.mean - 5.0).abs() < 0.25, "{f:?}");
        assert!((f.std - 2.0).abs() < 0.1, "{f:?}");
        assert!(f.gaussian);
    }

    #[test]
    fn uniform_column_fails_tight_screen() {
        let mut r = rng(2);
        let col: Vec<f64> = (0..2000).map(|_| r.random_range(0.0..1.0)).collect();
        let subjects = subjects_from_column(&col, 20);
        let loose = population_stats(&subjects, &GaussianityScreen::default()).unwrap();
        assert!((loose.features[0].excess_kurtosis + 1.2).abs() < 0.1);
        let tight = GaussianityScreen {
            max_abs_skew: 0.5,
            max_abs_excess_kurtosis: 1.0,
        };
        assert!(!population_stats(&subjects, &tight).unwrap().features[0].gaussian);
    }

    #[test]
    fn constant_column_is_flagged_not_fatal() {
        let subjects = subjects_from_column(&[3.0; 8], 4);
        let pop = population_stats(&subjects, &Default::default()).unwrap();
        assert!(pop.features[0].zero_variance);
        assert!(!pop.features[0].retained());
        assert_eq!(pop.normalize(&FeatureVector::new(vec![7.0], "x")).unwrap(), vec![0.0]);
    }

    #[test]
    fn population_preconditions() {
        assert!(population_stats(&subjects_from_column(&[1.0, 2.0], 2), &Default::default()).is_err());
        assert!(population_stats(&subjects_from_column(&[1.0, 2.0, 3.0], 2), &Default::default()).is_err());
    }

    #[test]
    fn subject_spread_is_unbiased_and_floored() {
        let pop = PopulationStats {
            features: vec![
                FeatureStats {
                    mean: 0.0,
                    std: 1.0,
                    skew: 0.0,
                    excess_kurtosis: 0.0,
                    gaussian: true,
                    zero_variance: false,
                };
                2
            ],
        };
        let samples = vec![
            FeatureVector::new(vec![1.0, 2.0], "a"),
            FeatureVector::new(vec![3.0, 2.0], "a"),
        ];
        let s = subject_stats(&samples, &pop).unwrap();
        assert_eq!(s.mu, vec![2.0, 2.0]);
        assert!((s.sigma[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.sigma[1], SIGMA_FLOOR);
        assert!(subject_stats(&samples[..1], &pop).is_err());
        let w = worst_case_sigma(&[s.clone(), SubjectStats { mu: vec![0.0; 2], sigma: vec![0.1, 0.5] }]).unwrap();
        assert_eq!(w, vec![2f64.sqrt(), 0.5]);
    }
}

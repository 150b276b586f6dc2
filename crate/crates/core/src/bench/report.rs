//! Report rows, Max/Ave/Min aggregation, and CSV emission.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cohort::Arm;
use super::sweep::Condition;
use crate::error::{Error, Result};

pub const DETAIL_FILE: &str = "detail.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";

/// One subject under one condition and arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub arm: String,
    pub condition: String,
    pub series: String,
    pub value: Option<f64>,
    pub subject_id: String,
    pub key_len: usize,
    /// Mean fraction of matching bits over trials.
    pub reliability: f64,
    /// Fraction of trials reproducing the key exactly.
    pub exact_fraction: f64,
    pub min_entropy_mean: f64,
    pub min_entropy_min: f64,
    pub min_entropy_max: f64,
    /// `ok`, `enroll_failed`, or `missing_<n>` for trials without beats.
    pub status: String,
}

impl ReportRow {
    pub fn new(experiment: &str, arm: Arm, condition: &Condition, subject_id: &str) -> Self {
        ReportRow {
            experiment: experiment.into(),
            arm: arm.label().into(),
            condition: condition.label(),
            series: condition.series(),
            value: condition.value(),
            subject_id: subject_id.into(),
            key_len: 0,
            reliability: f64::NAN,
            exact_fraction: f64::NAN,
            min_entropy_mean: f64::NAN,
            min_entropy_min: f64::NAN,
            min_entropy_max: f64::NAN,
            status: "ok".into(),
        }
    }

    pub fn enrolled(&self) -> bool {
        self.status != "enroll_failed"
    }
}

/// Max/Ave/Min of key length, reliability, and min-entropy for one arm
/// under one condition, over enrolled subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub arm: String,
    pub condition: String,
    pub series: String,
    pub value: Option<f64>,
    pub subjects: usize,
    pub flagged: usize,
    pub key_len_max: f64,
    pub key_len_ave: f64,
    pub key_len_min: f64,
    pub reliability_max: f64,
    pub reliability_ave: f64,
    pub reliability_min: f64,
    pub min_entropy_max: f64,
    pub min_entropy_ave: f64,
    pub min_entropy_min: f64,
}

fn max_ave_min(values: &[f64]) -> (f64, f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    (max, finite.iter().sum::<f64>() / finite.len() as f64, min)
}

/// Groups rows by (experiment, arm, condition) in order of first
/// appearance.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in rows {
        let k = (r.experiment.as_str(), r.arm.as_str(), r.condition.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(e, a, c)| {
            let group: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.experiment == e && r.arm == a && r.condition == c)
                .collect();
            let ok: Vec<&&ReportRow> = group.iter().filter(|r| r.enrolled()).collect();
            let col = |f: fn(&ReportRow) -> f64| max_ave_min(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let kl = col(|r| r.key_len as f64);
            let rel = col(|r| r.reliability);
            let me = col(|r| r.min_entropy_mean);
            SummaryRow {
                experiment: e.into(),
                arm: a.into(),
                condition: c.into(),
                series: group[0].series.clone(),
                value: group[0].value,
                subjects: ok.len(),
                flagged: group.iter().filter(|r| r.status != "ok").count(),
                key_len_max: kl.0,
                key_len_ave: kl.1,
                key_len_min: kl.2,
                reliability_max: rel.0,
                reliability_ave: rel.1,
                reliability_min: rel.2,
                min_entropy_max: me.0,
                min_entropy_ave: me.1,
                min_entropy_min: me.2,
            }
        })
        .collect()
}

/// Long-format plotting record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub experiment: String,
    pub arm: String,
    pub series: String,
    pub x: Option<f64>,
    pub metric: String,
    pub stat: String,
    pub value: f64,
}

pub fn plot_points(summary: &[SummaryRow]) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    for s in summary {
        let metrics = [
            ("key_len", [s.key_len_max, s.key_len_ave, s.key_len_min]),
            ("reliability", [s.reliability_max, s.reliability_ave, s.reliability_min]),
            ("min_entropy", [s.min_entropy_max, s.min_entropy_ave, s.min_entropy_min]),
        ];
        for (metric, values) in metrics {
            for (stat, value) in ["max", "ave", "min"].into_iter().zip(values) {
                out.push(PlotPoint {
                    experiment: s.experiment.clone(),
                    arm: s.arm.clone(),
                    series: s.series.clone(),
                    x: s.value,
                    metric: metric.into(),
                    stat: stat.into(),
                    value,
                });
            }
        }
    }
    out
}

fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<ReportRow>, _>>()
        .map_err(Error::from)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub detail: PathBuf,
    pub summary: PathBuf,
}

/// Writes the per-subject table and its Max/Ave/Min summary into `dir`.
pub fn write_report(rows: &[ReportRow], dir: &Path) -> Result<ReportFiles> {
    if rows.is_empty() {
        return Err(Error::config("a report needs at least one row"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        detail: dir.join(DETAIL_FILE),
        summary: dir.join(SUMMARY_FILE),
    };
    write_csv(&files.detail, rows)?;
    write_csv(&files.summary, &summarize(rows))?;
    Ok(files)
}

/// Writes long-format plotting data derived from the summary.
pub fn write_plot_data(rows: &[ReportRow], dir: &Path) -> Result<PathBuf> {
    if rows.is_empty() {
        return Err(Error::config("plot data needs at least one row"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(PLOT_FILE);
    write_csv(&path, &plot_points(&summarize(rows)))?;
    Ok(path)
}

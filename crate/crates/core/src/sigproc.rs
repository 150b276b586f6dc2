//! ECG preprocessing and feature extraction.
//!
//! Pipeline: linear-phase FIR bandpass (optional) → Pan–Tompkins R-peak
//! detection → fixed-window beat segmentation around each R peak →
//! normalize / moving-average convolve / normalize (NCN) features.
//!
//! All functions are pure; identical inputs give bit-identical outputs.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled single-lead recording in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    samples: Vec<f64>,
    fs: f64,
}

impl RawSignal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::config(format!("sampling rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::Degenerate("signal has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("sample {i} is not finite")));
        }
        Ok(RawSignal { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Mean square of the samples.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    /// Contiguous piece `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<RawSignal> {
        RawSignal::new(self.samples[start..end].to_vec(), self.fs)
    }
}

pub(crate) fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// One heartbeat cut out around its R peak.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSegment {
    pub samples: Vec<f64>,
    pub r_index: usize,
    pub fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub subject_id: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, subject_id: impl Into<String>) -> Self {
        FeatureVector {
            values,
            subject_id: subject_id.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

// ---------------------------------------------------------------------------
// FIR bandpass
// ---------------------------------------------------------------------------

/// Hamming-windowed sinc bandpass taps.
///
/// Built as the difference of two lowpass prototypes, each scaled to unit
/// DC gain, so the bandpass has exactly zero gain at DC.
pub fn design_bandpass(lo: f64, hi: f64, taps: usize, fs: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::config(format!(
            "band edges must satisfy 0 < lo < hi < fs/2 (lo={lo}, hi={hi}, fs={fs})"
        )));
    }
    if taps.is_multiple_of(2) || taps < 3 {
        return Err(Error::config(format!("tap count must be odd and >= 3, got {taps}")));
    }
    let high = lowpass_taps(hi / fs, taps);
    let low = lowpass_taps(lo / fs, taps);
    Ok(high.iter().zip(&low).map(|(h, l)| h - l).collect())
}

fn lowpass_taps(cutoff: f64, taps: usize) -> Vec<f64> {
    let m = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
            };
            let window =
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    // Mirror so the taps are exactly symmetric despite rounding in sin/cos.
    for n in 0..taps / 2 {
        h[taps - 1 - n] = h[n];
    }
    let gain: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= gain);
    h
}

/// Zero-phase application of symmetric taps with edge-replicated padding.
/// Output has the input's length.
pub fn apply_fir(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = taps.len() / 2;
    let n = x.len();
    let first = x[0];
    let last = x[n - 1];
    let mut padded = Vec::with_capacity(n + 2 * half);
    padded.extend(std::iter::repeat_n(first, half));
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat_n(last, half));
    (0..n)
        .map(|i| {
            padded[i..i + taps.len()]
                .iter()
                .zip(taps)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

pub fn bandpass_fir(signal: &RawSignal, lo: f64, hi: f64, taps: usize) -> Result<RawSignal> {
    let h = design_bandpass(lo, hi, taps, signal.fs)?;
    RawSignal::new(apply_fir(&signal.samples, &h), signal.fs)
}

// ---------------------------------------------------------------------------
// Pan–Tompkins
// ---------------------------------------------------------------------------

/// Minimum spacing between accepted R peaks.
pub const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_WINDOW_S: f64 = 0.15;
const QRS_BAND: (f64, f64) = (5.0, 15.0);
/// Detections closer than this to the previous QRS must show at least
/// half its slope, otherwise they are taken for T waves or noise.
const T_WAVE_WINDOW_S: f64 = 0.36;
const MIN_DURATION_S: f64 = 2.0;

/// Pan–Tompkins QRS detection.
///
/// QRS-band emphasis (5–15 Hz) → five-point derivative → squaring → 150 ms
/// moving-window integration → adaptive signal/noise thresholds with a
/// 200 ms refractory period, slope-based T-wave rejection within 360 ms,
/// and RR-based search-back. Each detection is
/// refined to the maximum of the QRS-band signal within half an
/// integration window.
pub fn detect_r_peaks(signal: &RawSignal) -> Result<Vec<usize>> {
    let fs = signal.fs;
    if signal.duration() < MIN_DURATION_S {
        return Err(Error::config(format!(
            "R-peak detection needs at least {MIN_DURATION_S} s of signal, got {:.3} s",
            signal.duration()
        )));
    }
    let band_hi = QRS_BAND.1.min(0.45 * fs);
    let qrs_taps = {
        let t = (0.5 * fs).round() as usize;
        (t | 1).max(3)
    };
    let emphasized = apply_fir(
        &signal.samples,
        &design_bandpass(QRS_BAND.0.min(band_hi / 2.0), band_hi, qrs_taps, fs)?,
    );

    let n = emphasized.len();
    let derivative: Vec<f64> = (0..n)
        .map(|i| {
            let at = |k: isize| emphasized[(i as isize + k).clamp(0, n as isize - 1) as usize];
            (2.0 * at(2) + at(1) - at(-1) - 2.0 * at(-2)) / 8.0
        })
        .collect();
    let squared: Vec<f64> = derivative.iter().map(|d| d * d).collect();
    let window = ((INTEGRATION_WINDOW_S * fs).round() as usize).max(1);
    let integrated = moving_average(&squared, window | 1);

    let peak_max = integrated.iter().cloned().fold(0.0_f64, f64::max);
    if peak_max <= f64::MIN_POSITIVE {
        warn!("no QRS energy found; returning no R peaks");
        return Ok(Vec::new());
    }

    let refractory = (REFRACTORY_S * fs).ceil() as usize;
    let t_wave = (T_WAVE_WINDOW_S * fs).round() as usize;
    // Steepest QRS-band slope in the integration window ending at `k`.
    let slope = |k: usize| {
        derivative[k.saturating_sub(window)..=k]
            .iter()
            .fold(0.0_f64, |m, d| m.max(d.abs()))
    };
    let candidates: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| integrated[i] > integrated[i - 1] && integrated[i] >= integrated[i + 1])
        .collect();

    // Learning phase over the first two seconds.
    let learn = ((2.0 * fs) as usize).min(n);
    let learn_max = integrated[..learn].iter().cloned().fold(0.0_f64, f64::max);
    let learn_mean = integrated[..learn].iter().sum::<f64>() / learn as f64;
    let mut spki = 0.25 * learn_max;
    let mut npki = 0.5 * learn_mean;

    let mut qrs: Vec<usize> = Vec::new();
    let mut since_last: Vec<usize> = Vec::new();
    let mut rr_recent: Vec<f64> = Vec::new();

    for &c in &candidates {
        let threshold1 = npki + 0.25 * (spki - npki);
        let threshold2 = 0.5 * threshold1;

        // Search back for a missed beat when the gap grows too long.
        if let (Some(&last), false) = (qrs.last(), rr_recent.is_empty()) {
            let rr_avg = rr_recent.iter().sum::<f64>() / rr_recent.len() as f64;
            if (c - last) as f64 > 1.66 * rr_avg {
                let missed = since_last
                    .iter()
                    .copied()
                    .filter(|&k| k - last >= refractory && c - k >= refractory)
                    .filter(|&k| integrated[k] > threshold2)
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(k) = missed {
                    spki = 0.25 * integrated[k] + 0.75 * spki;
                    push_rr(&mut rr_recent, (k - last) as f64);
                    qrs.push(k);
                    since_last.clear();
                }
            }
        }

        let value = integrated[c];
        match qrs.last().copied() {
            Some(last) if c - last < refractory => {
                if value > integrated[last] {
                    *qrs.last_mut().unwrap() = c;
                }
            }
            Some(last) if value > threshold1 && c - last < t_wave && slope(c) < 0.5 * slope(last) => {
                npki = 0.125 * value + 0.875 * npki;
                since_last.push(c);
            }
            _ if value > threshold1 => {
                spki = 0.125 * value + 0.875 * spki;
                if let Some(&last) = qrs.last() {
                    push_rr(&mut rr_recent, (c - last) as f64);
                }
                qrs.push(c);
                since_last.clear();
            }
            _ => {
                npki = 0.125 * value + 0.875 * npki;
                since_last.push(c);
            }
        }
    }

    // Refine to the QRS-band maximum and re-impose the refractory spacing.
    let half = window / 2;
    let mut refined: Vec<usize> = Vec::with_capacity(qrs.len());
    for &q in &qrs {
        let lo = q.saturating_sub(half);
        let hi = (q + half + 1).min(n);
        let r = (lo..hi)
            .max_by(|&a, &b| emphasized[a].total_cmp(&emphasized[b]))
            .unwrap_or(q);
        match refined.last().copied() {
            Some(prev) if r < prev + refractory => {
                if emphasized[r] > emphasized[prev] {
                    *refined.last_mut().unwrap() = r;
                }
            }
            _ => refined.push(r),
        }
    }
    // A replacement can move a peak backwards onto its predecessor.
    refined.dedup_by(|b, a| *b < *a + refractory);

    if refined.is_empty() {
        warn!("Pan-Tompkins thresholds rejected every candidate; returning no R peaks");
    }
    Ok(refined)
}

fn push_rr(rr: &mut Vec<f64>, value: f64) {
    rr.push(value);
    if rr.len() > 8 {
        rr.remove(0);
    }
}

/// Centered moving average of odd width with edge replication.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let taps = vec![1.0 / width as f64; width];
    apply_fir(x, &taps)
}

// ---------------------------------------------------------------------------
// Segmentation and features
// ---------------------------------------------------------------------------

/// Milliseconds before and after the R peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatWindow {
    pub pre_ms: f64,
    pub post_ms: f64,
}

impl Default for BeatWindow {
    fn default() -> Self {
        BeatWindow {
            pre_ms: 250.0,
            post_ms: 400.0,
        }
    }
}

impl BeatWindow {
    pub fn length(&self, fs: f64) -> usize {
        ((self.pre_ms + self.post_ms) * fs / 1000.0).round() as usize
    }

    pub fn r_offset(&self, fs: f64) -> usize {
        (self.pre_ms * fs / 1000.0).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub beats: Vec<BeatSegment>,
    /// Peaks whose window ran past either end of the signal.
    pub dropped: usize,
}

pub fn segment_beats(signal: &RawSignal, peaks: &[usize], window: BeatWindow) -> Segmentation {
    let len = window.length(signal.fs);
    let r_index = window.r_offset(signal.fs);
    let mut beats = Vec::with_capacity(peaks.len());
    let mut dropped = 0;
    for &p in peaks {
        match p.checked_sub(r_index) {
            Some(start) if start + len <= signal.len() && len > r_index => {
                beats.push(BeatSegment {
                    samples: signal.samples[start..start + len].to_vec(),
                    r_index,
                    fs: signal.fs,
                });
            }
            _ => dropped += 1,
        }
    }
    Segmentation { beats, dropped }
}

fn z_normalize(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return None;
    }
    Some(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Normalize → moving-average convolve → normalize.
pub fn extract_features(beat: &BeatSegment, kernel_width: usize) -> Result<FeatureVector> {
    if kernel_width.is_multiple_of(2) || kernel_width >= beat.samples.len() {
        return Err(Error::config(format!(
            "kernel width must be odd and shorter than the segment ({}), got {kernel_width}",
            beat.samples.len()
        )));
    }
    let degenerate = || Error::Degenerate("beat segment has zero variance".into());
    let first = z_normalize(&beat.samples).ok_or_else(degenerate)?;
    let smoothed = moving_average(&first, kernel_width);
    let values = z_normalize(&smoothed).ok_or_else(degenerate)?;
    Ok(FeatureVector::new(values, ""))
}

// ---------------------------------------------------------------------------
// Recording-level pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Apply the bandpass before segmentation. Detection always runs on its
    /// own QRS-band copy of the signal.
    pub denoise: bool,
    pub band_hz: (f64, f64),
    pub taps: usize,
    pub kernel_width: usize,
    pub window: BeatWindow,
    /// Beats whose mean product with the recording's median beat falls
    /// below this are treated as misdetections and dropped.
    pub min_beat_corr: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            denoise: true,
            band_hz: (1.0, 40.0),
            taps: 129,
            kernel_width: 5,
            window: BeatWindow::default(),
            min_beat_corr: 0.3,
        }
    }
}

impl PipelineConfig {
    pub fn feature_dim(&self, fs: f64) -> usize {
        self.window.length(fs)
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        design_bandpass(self.band_hz.0, self.band_hz.1, self.taps, fs)?;
        let len = self.window.length(fs);
        if self.kernel_width.is_multiple_of(2) || self.kernel_width >= len {
            return Err(Error::config(format!(
                "kernel width {} must be odd and below the beat length {len}",
                self.kernel_width
            )));
        }
        if !(-1.0..=1.0).contains(&self.min_beat_corr) {
            return Err(Error::config(format!(
                "beat correlation floor {} outside [-1, 1]",
                self.min_beat_corr
            )));
        }
        Ok(())
    }
}

/// Feature vector of every complete beat in the recording.
pub fn beat_features(signal: &RawSignal, config: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    let peaks = detect_r_peaks(signal)?;
    let source = if config.denoise {
        bandpass_fir(signal, config.band_hz.0, config.band_hz.1, config.taps)?
    } else {
        signal.clone()
    };
    let seg = segment_beats(&source, &peaks, config.window);
    seg.beats
        .iter()
        .filter_map(|b| match extract_features(b, config.kernel_width) {
            Ok(f) => Some(Ok(f)),
            Err(Error::Degenerate(_)) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// Robust per-recording feature vector: the per-sample median over beats
/// that agree with the recording's median beat, re-normalized to zero mean
/// and unit variance. `None` when no complete beat was found.
pub fn recording_features(signal: &RawSignal, config: &PipelineConfig) -> Result<Option<FeatureVector>> {
    let beats = beat_features(signal, config)?;
    let Some(template) = median_features(beats.iter()) else {
        return Ok(None);
    };
    let dim = template.dim() as f64;
    let agreeing: Vec<&FeatureVector> = beats
        .iter()
        .filter(|b| {
            let corr = b.values.iter().zip(&template.values).map(|(x, y)| x * y).sum::<f64>() / dim;
            corr >= config.min_beat_corr
        })
        .collect();
    let center = if agreeing.is_empty() {
        template
    } else {
        median_features(agreeing.into_iter()).expect("non-empty")
    };
    Ok(z_normalize(&center.values).map(|values| FeatureVector::new(values, center.subject_id)))
}

/// Per-sample median of a set of feature vectors of equal dimension.
pub fn median_features<'a>(beats: impl Iterator<Item = &'a FeatureVector>) -> Option<FeatureVector> {
    let beats: Vec<&FeatureVector> = beats.collect();
    let first = *beats.first()?;
    let mut column = Vec::with_capacity(beats.len());
    let values = (0..first.dim())
        .map(|k| {
            column.clear();
            column.extend(beats.iter().map(|b| b.values[k]));
            column.sort_by(f64::total_cmp);
            let n = column.len();
            if n % 2 == 1 {
                column[n / 2]
            } else {
                0.5 * (column[n / 2 - 1] + column[n / 2])
            }
        })
        .collect();
    Some(FeatureVector::new(values, first.subject_id.clone()))
}

pub fn mean_features(beats: &[FeatureVector]) -> Option<FeatureVector> {
    let first = beats.first()?;
    let mut acc = vec![0.0; first.dim()];
    for b in beats {
        for (a, v) in acc.iter_mut().zip(&b.values) {
            *a += v;
        }
    }
    let n = beats.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(FeatureVector::new(acc, first.subject_id.clone()))
}

// ---------------------------------------------------------------------------
// CSV signal format: `fs=<Hz>` header, then one sample per line.
// ---------------------------------------------------------------------------

pub fn write_signal_csv<W: Write>(signal: &RawSignal, mut out: W) -> std::io::Result<()> {
    let mut text = String::with_capacity(signal.len() * 12);
    let _ = writeln!(text, "fs={}", signal.fs);
    for s in &signal.samples {
        let _ = writeln!(text, "{s}");
    }
    out.write_all(text.as_bytes())
}

pub fn read_signal_csv<R: Read>(input: R) -> Result<RawSignal> {
    let mut lines = BufReader::new(input).lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line.map_err(|e| Error::Parse(e.to_string()))?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(Error::Parse("empty signal file".into())),
        }
    };
    let fs: f64 = header
        .trim()
        .strip_prefix("fs=")
        .ok_or_else(|| Error::Parse(format!("expected `fs=<Hz>` header, found {header:?}")))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad sampling rate: {e}")))?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        samples.push(
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?,
        );
    }
    RawSignal::new(samples, fs)
}

pub fn save_signal(signal: &RawSignal, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_signal_csv(signal, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_signal(path: &Path) -> Result<RawSignal> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_signal_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, secs: f64) -> RawSignal {
        let n = (fs * secs) as usize;
        RawSignal::new(
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
                .collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_band_edges() {
        let s = sine(10.0, 256.0, 4.0);
        assert!(matches!(bandpass_fir(&s, 0.0, 40.0, 129), Err(Error::Config(_))));
        assert!(matches!(bandpass_fir(&s, 40.0, 1.0, 129), Err(Error::Config(_))));
        assert!(matches!(bandpass_fir(&s, 1.0, 128.0, 129), Err(Error::Config(_))));
        assert!(matches!(bandpass_fir(&s, 1.0, 40.0, 128), Err(Error::Config(_))));
    }

    #[test]
    fn zero_in_zero_out() {
        let z = RawSignal::new(vec![0.0; 1000], 256.0).unwrap();
        let y = bandpass_fir(&z, 1.0, 40.0, 129).unwrap();
        assert!(y.samples().iter().all(|&v| v == 0.0));
        assert_eq!(y.len(), 1000);
    }

    #[test]
    fn bandpass_taps_have_zero_dc_gain() {
        let h = design_bandpass(1.0, 40.0, 129, 256.0).unwrap();
        assert!(h.iter().sum::<f64>().abs() < 1e-12);
        for k in 0..h.len() {
            assert_eq!(h[k], h[h.len() - 1 - k]);
        }
    }

    #[test]
    fn flatline_has_no_peaks() {
        let flat = RawSignal::new(vec![0.3; 2560], 256.0).unwrap();
        assert!(detect_r_peaks(&flat).unwrap().is_empty());
    }

    #[test]
    fn short_signal_is_rejected_by_detector() {
        let s = RawSignal::new(vec![0.0; 256], 256.0).unwrap();
        assert!(detect_r_peaks(&s).is_err());
    }

    #[test]
    fn segmentation_drops_edge_peaks() {
        let s = RawSignal::new((0..2560).map(|i| i as f64).collect(), 256.0).unwrap();
        let w = BeatWindow::default();
        // 10 peaks, first and last too close to the edges.
        let peaks: Vec<usize> = std::iter::once(20)
            .chain((1..9).map(|k| k * 256))
            .chain(std::iter::once(2540))
            .collect();
        let seg = segment_beats(&s, &peaks, w);
        assert_eq!(seg.beats.len(), 8);
        assert_eq!(seg.dropped, 2);
        let len = w.length(256.0);
        assert_eq!(len, 166);
        assert!(seg.beats.iter().all(|b| b.samples.len() == len && b.r_index == 64));
    }

    #[test]
    fn single_centered_peak_yields_one_segment() {
        let s = RawSignal::new(vec![1.0; 5000], 500.0).unwrap();
        let w = BeatWindow::default();
        let seg = segment_beats(&s, &[2500], w);
        assert_eq!(seg.beats.len(), 1);
        assert_eq!(seg.beats[0].r_index, (250.0_f64 * 500.0 / 1000.0).round() as usize);
        assert!(segment_beats(&s, &[], w).beats.is_empty());
    }

    #[test]
    fn constant_beat_is_degenerate() {
        let beat = BeatSegment {
            samples: vec![2.0; 166],
            r_index: 64,
            fs: 256.0,
        };
        assert!(matches!(extract_features(&beat, 5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn unit_kernel_is_plain_normalization() {
        let samples: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let beat = BeatSegment {
            samples: samples.clone(),
            r_index: 30,
            fs: 256.0,
        };
        let f = extract_features(&beat, 1).unwrap();
        let z = z_normalize(&samples).unwrap();
        for (a, b) in f.values.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn even_kernel_is_rejected() {
        let beat = BeatSegment {
            samples: (0..50).map(|i| i as f64).collect(),
            r_index: 10,
            fs: 256.0,
        };
        assert!(extract_features(&beat, 4).is_err());
        assert!(extract_features(&beat, 51).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = RawSignal::new(vec![0.1, -2.5e-7, 1.0 / 3.0, 42.0], 256.0).unwrap();
        let mut buf = Vec::new();
        write_signal_csv(&s, &mut buf).unwrap();
        assert!(buf.starts_with(b"fs=256\n"));
        let back = read_signal_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_requires_header() {
        assert!(read_signal_csv(&b"0.1\n0.2\n"[..]).is_err());
    }
}

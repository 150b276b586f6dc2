//! Synthetic ECG from the McSharry three-ODE dynamical model, parametric
//! noise sources, and stress/exercise parameter scaling.
//!
//! The model state is a point `(x, y)` attracted to the unit circle and
//! rotating at the heart rate, plus a `z` channel driven by one Gaussian
//! event per wave (P, Q, R, S, T) placed at angle `theta_i` with amplitude
//! `a_i` and angular width `b_i`:
//!
//! ```text
//! x' = (1 - r) x - w y
//! y' = (1 - r) y + w x
//! z' = -sum_i a_i dtheta_i exp(-dtheta_i^2 / (2 b_i^2)) - (z - z0(t))
//! ```
//!
//! `z0` is a slow sinusoidal baseline (respiration coupling). Integration is
//! fixed-step RK4 at `1/fs`.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::sigproc::{apply_fir, design_bandpass, power, RawSignal};

/// Raw `z` is scaled by this gain so the canonical R wave is ~1 mV at
/// 60 bpm.
pub const OUTPUT_GAIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wave {
    P,
    Q,
    R,
    S,
    T,
}

impl Wave {
    pub const ALL: [Wave; 5] = [Wave::P, Wave::Q, Wave::R, Wave::S, Wave::T];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    /// Angular position (radians, R at 0).
    pub theta: f64,
    /// Event amplitude.
    pub a: f64,
    /// Angular width (radians).
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSharryParams {
    pub p: WaveParams,
    pub q: WaveParams,
    pub r: WaveParams,
    pub s: WaveParams,
    pub t: WaveParams,
    pub hr_bpm: f64,
    pub fs: f64,
    /// Respiratory baseline `(amplitude mV, frequency Hz)`.
    pub baseline_coupling: (f64, f64),
}

impl Default for McSharryParams {
    fn default() -> Self {
        let w = |theta: f64, a: f64, b: f64| WaveParams { theta, a, b };
        McSharryParams {
            p: w(-PI / 3.0, 1.2, 0.25),
            q: w(-PI / 12.0, -5.0, 0.1),
            r: w(0.0, 30.0, 0.1),
            s: w(PI / 12.0, -7.5, 0.1),
            t: w(PI / 2.0, 0.75, 0.4),
            hr_bpm: 60.0,
            fs: 256.0,
            baseline_coupling: (0.15, 0.25),
        }
    }
}

impl McSharryParams {
    pub fn waves(&self) -> [WaveParams; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    pub fn wave(&self, w: Wave) -> &WaveParams {
        match w {
            Wave::P => &self.p,
            Wave::Q => &self.q,
            Wave::R => &self.r,
            Wave::S => &self.s,
            Wave::T => &self.t,
        }
    }

    pub fn wave_mut(&mut self, w: Wave) -> &mut WaveParams {
        match w {
            Wave::P => &mut self.p,
            Wave::Q => &mut self.q,
            Wave::R => &mut self.r,
            Wave::S => &mut self.s,
            Wave::T => &mut self.t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::config(format!("fs must be positive, got {}", self.fs)));
        }
        if !(self.hr_bpm > 0.0 && self.hr_bpm.is_finite()) {
            return Err(Error::config(format!("heart rate must be positive, got {}", self.hr_bpm)));
        }
        let waves = self.waves();
        for (w, p) in Wave::ALL.iter().zip(&waves) {
            if !(p.b > 0.0) || !p.a.is_finite() || !p.theta.is_finite() {
                return Err(Error::config(format!("wave {w:?} has invalid parameters {p:?}")));
            }
        }
        if !waves.windows(2).all(|pair| pair[0].theta < pair[1].theta) {
            return Err(Error::config("wave angles must be ordered P < Q < R < S < T"));
        }
        let (amp, freq) = self.baseline_coupling;
        if !(amp >= 0.0 && freq >= 0.0 && amp.is_finite() && freq.is_finite()) {
            return Err(Error::config("baseline coupling must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn angular_rate(&self) -> f64 {
        2.0 * PI * self.hr_bpm / 60.0
    }
}

fn wrap_angle(x: f64) -> f64 {
    let mut v = (x + PI).rem_euclid(2.0 * PI) - PI;
    if v == -PI {
        v = PI;
    }
    v
}

struct Model<'a> {
    waves: [WaveParams; 5],
    omega: f64,
    base_amp: f64,
    base_freq: f64,
    base_phase: f64,
    _params: &'a McSharryParams,
}

impl Model<'_> {
    fn derivative(&self, t: f64, s: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = s;
        let radius_pull = 1.0 - (x * x + y * y).sqrt();
        let theta = y.atan2(x);
        let forcing: f64 = self
            .waves
            .iter()
            .map(|w| {
                let d = wrap_angle(theta - w.theta);
                w.a * d * (-d * d / (2.0 * w.b * w.b)).exp()
            })
            .sum();
        let z0 = self.base_amp * (2.0 * PI * self.base_freq * t + self.base_phase).sin();
        [
            radius_pull * x - self.omega * y,
            radius_pull * y + self.omega * x,
            -forcing - (z - z0),
        ]
    }
}

/// Output of [`integrate`], exposing the limit-cycle coordinates for
/// diagnostics alongside the ECG channel.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Runs the model for `duration` seconds; the seed fixes the starting
/// phase of the cardiac cycle and of the respiratory baseline.
pub fn integrate(params: &McSharryParams, duration: f64, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    if !(duration >= 2.0) {
        return Err(Error::config(format!("duration must be at least 2 s, got {duration}")));
    }
    let n = (duration * params.fs).round() as usize;
    let mut rng = rng(seed);
    let start_angle: f64 = rng.random_range(-PI..PI);
    let base_phase: f64 = rng.random_range(0.0..2.0 * PI);
    let model = Model {
        waves: params.waves(),
        omega: params.angular_rate(),
        base_amp: params.baseline_coupling.0 / OUTPUT_GAIN,
        base_freq: params.baseline_coupling.1,
        base_phase,
        _params: params,
    };
    let h = 1.0 / params.fs;
    let mut state = [start_angle.cos(), start_angle.sin(), 0.0];
    let mut traj = Trajectory {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
    };
    for i in 0..n {
        traj.x.push(state[0]);
        traj.y.push(state[1]);
        traj.z.push(state[2] * OUTPUT_GAIN);
        let t = i as f64 * h;
        let k1 = model.derivative(t, state);
        let k2 = model.derivative(t + h / 2.0, add(state, k1, h / 2.0));
        let k3 = model.derivative(t + h / 2.0, add(state, k2, h / 2.0));
        let k4 = model.derivative(t + h, add(state, k3, h));
        for j in 0..3 {
            state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("model state diverged at step {i}")));
        }
    }
    Ok(traj)
}

fn add(s: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// The ECG (`z`) channel of the dynamical model.
pub fn generate_ecg(params: &McSharryParams, duration: f64, seed: u64) -> Result<RawSignal> {
    let traj = integrate(params, duration, seed)?;
    RawSignal::new(traj.z, params.fs)
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NoiseKind {
    /// Baseline wander.
    Bw,
    /// Electrode movement.
    Em,
    /// Muscle artifact.
    Ma,
    /// Equal-power sum of the three.
    Mixed,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::Bw, NoiseKind::Em, NoiseKind::Ma, NoiseKind::Mixed];

    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::Bw => "BW",
            NoiseKind::Em => "EM",
            NoiseKind::Ma => "MA",
            NoiseKind::Mixed => "MIXED",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BW" => Ok(NoiseKind::Bw),
            "EM" => Ok(NoiseKind::Em),
            "MA" => Ok(NoiseKind::Ma),
            "MIXED" => Ok(NoiseKind::Mixed),
            other => Err(Error::Parse(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub seed: u64,
}

/// Unit-power noise of the requested kind.
pub fn synth_noise(kind: NoiseKind, length: usize, fs: f64, seed: u64) -> Result<RawSignal> {
    if length == 0 {
        return Err(Error::config("noise length must be positive"));
    }
    if !(fs > 0.0) {
        return Err(Error::config(format!("fs must be positive, got {fs}")));
    }
    let raw = match kind {
        NoiseKind::Bw => baseline_wander(length, fs, seed),
        NoiseKind::Ma => muscle_artifact(length, fs, seed)?,
        NoiseKind::Em => electrode_motion(length, fs, seed)?,
        NoiseKind::Mixed => {
            let mut acc = vec![0.0; length];
            for (k, part) in [NoiseKind::Bw, NoiseKind::Em, NoiseKind::Ma].into_iter().enumerate() {
                let s = synth_noise(part, length, fs, derive_seed(seed, &[k as u64]))?;
                acc.iter_mut().zip(s.samples()).for_each(|(a, v)| *a += v);
            }
            acc
        }
    };
    RawSignal::new(unit_power(raw)?, fs)
}

fn unit_power(mut x: Vec<f64>) -> Result<Vec<f64>> {
    let p = power(&x);
    if !(p > 0.0) {
        return Err(Error::Degenerate("generated noise has zero power".into()));
    }
    let g = p.sqrt().recip();
    x.iter_mut().for_each(|v| *v *= g);
    Ok(x)
}

/// Sum of sinusoids below 0.5 Hz with random phases.
fn baseline_wander(length: usize, fs: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let comps: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.05..0.45),
                rng.random_range(0.5..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    (0..length)
        .map(|i| {
            let t = i as f64 / fs;
            comps
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum()
        })
        .collect()
}

fn band_limited_gaussian(length: usize, fs: f64, lo: f64, hi: f64, seed: u64) -> Result<Vec<f64>> {
    let hi = hi.min(0.45 * fs);
    let taps = (((fs).round() as usize) | 1).max(65);
    let h = design_bandpass(lo.min(hi / 2.0), hi, taps, fs)?;
    let mut rng = rng(seed);
    // Generate with a margin so filter start-up does not shape the output.
    let margin = taps;
    let white: Vec<f64> = (0..length + 2 * margin)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let filtered = apply_fir(&white, &h);
    Ok(filtered[margin..margin + length].to_vec())
}

/// On/off gate with ~50% duty cycle and raised-cosine edges.
fn burst_envelope(length: usize, fs: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let ramp = ((0.05 * fs).round() as usize).max(1);
    let mut env = vec![0.0; length];
    let mut on = rng.random_bool(0.5);
    let mut i = 0;
    while i < length {
        let dur = ((rng.random_range(0.2..1.0)) * fs).round().max(1.0) as usize;
        let end = (i + dur).min(length);
        if on {
            for (k, e) in env[i..end].iter_mut().enumerate() {
                let from_start = k;
                let to_end = end - i - 1 - k;
                let edge = from_start.min(to_end);
                *e = if edge >= ramp {
                    1.0
                } else {
                    0.5 - 0.5 * (PI * (edge as f64 + 0.5) / ramp as f64).cos()
                };
            }
        }
        on = !on;
        i = end;
    }
    env
}

fn muscle_artifact(length: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    let carrier = band_limited_gaussian(length, fs, 5.0, 50.0, derive_seed(seed, &[0]))?;
    let env = burst_envelope(length, fs, derive_seed(seed, &[1]));
    let mut out: Vec<f64> = carrier.iter().zip(&env).map(|(c, e)| c * e).collect();
    if power(&out) == 0.0 {
        // Degenerate gate on very short records: fall back to the carrier.
        out = carrier;
    }
    Ok(out)
}

/// Random baseline steps plus 1–10 Hz bursts.
fn electrode_motion(length: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng(derive_seed(seed, &[0]));
    let mut steps = vec![0.0; length];
    let mut level: f64 = StandardNormal.sample(&mut rng);
    let mut next = 0usize;
    for (i, s) in steps.iter_mut().enumerate() {
        if i >= next {
            level = StandardNormal.sample(&mut rng);
            next = i + (rng.random_range(0.5..2.0) * fs).round().max(1.0) as usize;
        }
        *s = level;
    }
    // Electrode settling smooths each step over ~100 ms.
    let smooth = (((0.1 * fs).round() as usize) | 1).max(1);
    let steps = crate::sigproc::moving_average(&steps, smooth);
    let steps = unit_power(steps)?;

    let carrier = band_limited_gaussian(length, fs, 1.0, 10.0, derive_seed(seed, &[1]))?;
    let env = burst_envelope(length, fs, derive_seed(seed, &[2]));
    let bursts: Vec<f64> = carrier.iter().zip(&env).map(|(c, e)| c * e).collect();
    let bursts = unit_power(bursts).unwrap_or_else(|_| vec![0.0; length]);
    Ok(steps.iter().zip(&bursts).map(|(a, b)| a + b).collect())
}

/// `clean + g * noise`, with `g` chosen so the clean-to-scaled-noise power
/// ratio is exactly `snr_db`.
pub fn mix_at_snr(clean: &RawSignal, noise: &RawSignal, snr_db: f64) -> Result<RawSignal> {
    if clean.len() != noise.len() {
        return Err(Error::SizeMismatch {
            what: "noise length",
            expected: clean.len(),
            actual: noise.len(),
        });
    }
    let g = noise_gain(clean, noise, snr_db)?;
    let mixed = clean
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(c, n)| c + g * n)
        .collect();
    RawSignal::new(mixed, clean.fs())
}

/// Amplitude factor applied to `noise` by [`mix_at_snr`].
pub fn noise_gain(clean: &RawSignal, noise: &RawSignal, snr_db: f64) -> Result<f64> {
    let ps = clean.power();
    let pn = noise.power();
    if !(pn > 0.0) {
        return Err(Error::Degenerate("noise has zero power".into()));
    }
    if !(ps > 0.0) {
        return Err(Error::Degenerate("clean signal has zero power; SNR undefined".into()));
    }
    Ok((ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Clean signal plus noise of `spec.kind` at `spec.snr_db`.
pub fn add_noise(clean: &RawSignal, spec: &NoiseSpec) -> Result<RawSignal> {
    let noise = synth_noise(spec.kind, clean.len(), clean.fs(), spec.seed)?;
    mix_at_snr(clean, &noise, spec.snr_db)
}

// ---------------------------------------------------------------------------
// Stress / exercise scaling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StressTarget {
    A,
    B,
    Theta,
}

impl StressTarget {
    pub const ALL: [StressTarget; 3] = [StressTarget::A, StressTarget::B, StressTarget::Theta];

    pub fn label(self) -> &'static str {
        match self {
            StressTarget::A => "a",
            StressTarget::B => "b",
            StressTarget::Theta => "theta",
        }
    }
}

/// ECG component a stress condition acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveGroup {
    P,
    Qrs,
    T,
}

impl WaveGroup {
    pub const ALL: [WaveGroup; 3] = [WaveGroup::P, WaveGroup::Qrs, WaveGroup::T];

    pub fn waves(self) -> &'static [Wave] {
        match self {
            WaveGroup::P => &[Wave::P],
            WaveGroup::Qrs => &[Wave::Q, Wave::R, Wave::S],
            WaveGroup::T => &[Wave::T],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WaveGroup::P => "P",
            WaveGroup::Qrs => "QRS",
            WaveGroup::T => "T",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressScale {
    pub target: StressTarget,
    /// Per-wave multipliers in P, Q, R, S, T order.
    pub factors: [f64; 5],
}

impl StressScale {
    pub const MIN_FACTOR: f64 = 0.5;
    pub const MAX_FACTOR: f64 = 1.0;

    pub fn identity(target: StressTarget) -> Self {
        StressScale {
            target,
            factors: [1.0; 5],
        }
    }

    /// `factor` on the waves of `group`, 1.0 elsewhere.
    pub fn on_group(target: StressTarget, group: WaveGroup, factor: f64) -> Self {
        let mut s = Self::identity(target);
        for w in group.waves() {
            s.factors[w.index()] = factor;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self
            .factors
            .iter()
            .find(|f| !(Self::MIN_FACTOR..=Self::MAX_FACTOR).contains(*f))
        {
            return Err(Error::config(format!(
                "stress factor {f} outside [{}, {}]",
                Self::MIN_FACTOR,
                Self::MAX_FACTOR
            )));
        }
        Ok(())
    }
}

/// Scales one parameter family per wave. Angles are scaled as offsets from
/// the R wave, which compresses the P and T waves toward the QRS complex.
pub fn apply_stress(params: &McSharryParams, scale: &StressScale) -> Result<McSharryParams> {
    scale.validate()?;
    let mut out = params.clone();
    let theta_r = params.r.theta;
    for w in Wave::ALL {
        let f = scale.factors[w.index()];
        let wp = out.wave_mut(w);
        match scale.target {
            StressTarget::A => wp.a *= f,
            StressTarget::B => wp.b *= f,
            StressTarget::Theta => wp.theta = theta_r + f * (wp.theta - theta_r),
        }
        if !(wp.b > 0.0) {
            return Err(Error::config(format!("stress made width of wave {w:?} non-positive")));
        }
    }
    out.validate()?;
    Ok(out)
}

/// `n` subjects, each base parameter multiplied by `1 + N(0, jitter)`.
/// Draws violating the parameter invariants are redrawn.
pub fn sample_population(
    base: &McSharryParams,
    n: usize,
    jitter: f64,
    seed: u64,
) -> Result<Vec<McSharryParams>> {
    if n < 2 {
        return Err(Error::config(format!("population needs at least 2 subjects, got {n}")));
    }
    if !(jitter > 0.0 && jitter <= 0.3) {
        return Err(Error::config(format!("jitter must lie in (0, 0.3], got {jitter}")));
    }
    base.validate()?;
    let normal = Normal::new(0.0, jitter).map_err(|e| Error::config(e.to_string()))?;
    (0..n)
        .map(|k| {
            let mut rng = rng(derive_seed(seed, &[k as u64]));
            loop {
                let mut m = || 1.0 + normal.sample(&mut rng);
                let mut p = base.clone();
                for w in Wave::ALL {
                    let wp = p.wave_mut(w);
                    wp.theta *= m();
                    wp.a *= m();
                    wp.b *= m();
                }
                p.hr_bpm *= m();
                if p.validate().is_ok() && p.hr_bpm > 30.0 {
                    return Ok(p);
                }
            }
        })
        .collect()
}

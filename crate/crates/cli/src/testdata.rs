//! Synthetic rate-of-revolution sessions with known features.
//!
//! The signal is a slow mean drift plus an oscillation whose instantaneous
//! frequency is twice the current mean (two strokes per revolution), with
//! injected overshoot and undershoot peaks whose times are written to a
//! sidecar file.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Peak value reached by an injected overshoot.
pub const OVERSHOOT_PEAK: f64 = 0.75;
/// Trough value reached by an injected undershoot.
pub const UNDERSHOOT_TROUGH: f64 = 0.1;
const BUMP_WIDTH_S: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Stays within a narrow band around the target.
    Steady,
    /// Large swings with repeated limit crossings.
    Poor,
    /// Moderate swings with one crossing of each limit.
    Novice,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "steady" => Ok(Profile::Steady),
            "poor" => Ok(Profile::Poor),
            "novice" => Ok(Profile::Novice),
            other => Err(format!(
                "unknown profile `{other}` (expected steady, poor or novice)"
            )),
        }
    }
}

struct Shape {
    drift: f64,
    amp: f64,
    amp_swing: f64,
    overshoots: usize,
    undershoots: usize,
}

impl Profile {
    fn shape(self) -> Shape {
        match self {
            Profile::Steady => Shape {
                drift: 0.015,
                amp: 0.045,
                amp_swing: 0.012,
                overshoots: 0,
                undershoots: 0,
            },
            Profile::Poor => Shape {
                drift: 0.06,
                amp: 0.08,
                amp_swing: 0.03,
                overshoots: 3,
                undershoots: 3,
            },
            Profile::Novice => Shape {
                drift: 0.04,
                amp: 0.07,
                amp_swing: 0.02,
                overshoots: 1,
                undershoots: 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Overshoot,
    Undershoot,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Overshoot => "overshoot",
            FeatureKind::Undershoot => "undershoot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub kind: FeatureKind,
    pub time_s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
    pub features: Vec<Feature>,
}

pub fn generate(
    profile: Profile,
    seed: u64,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<Session, String> {
    if !(duration_s.is_finite() && duration_s >= 10.0) {
        return Err("duration must be at least 10 s".into());
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz >= 10.0) {
        return Err("sample rate must be at least 10 Hz".into());
    }
    let shape = profile.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift_period = rng.gen_range(15.0..25.0);
    let amp_period = rng.gen_range(5.0..9.0);
    let jitter_period = rng.gen_range(4.0..6.0);
    let (p0, p1, p2, p3): (f64, f64, f64, f64) = (
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..2.0 * PI),
    );

    let n = (duration_s * sample_rate_hz).round() as usize;
    let dt = 1.0 / sample_rate_hz;
    let mut values = Vec::with_capacity(n);
    let mut phase = p3;
    for k in 0..n {
        let t = k as f64 * dt;
        let mean = 0.4 + shape.drift * (2.0 * PI * t / drift_period + p0).sin();
        let amp = shape.amp + shape.amp_swing * (2.0 * PI * t / amp_period + p1).sin();
        values.push(mean + amp * phase.sin());
        let jitter = 1.0 + 0.05 * (2.0 * PI * t / jitter_period + p2).sin();
        phase += 2.0 * PI * 2.0 * mean * jitter * dt;
    }

    let mut kinds: Vec<FeatureKind> = std::iter::repeat_n(FeatureKind::Overshoot, shape.overshoots)
        .chain(std::iter::repeat_n(
            FeatureKind::Undershoot,
            shape.undershoots,
        ))
        .collect();
    kinds.shuffle(&mut rng);
    let slot = duration_s / kinds.len().max(1) as f64;
    let mut features = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.into_iter().enumerate() {
        let centre = (i as f64 + rng.gen_range(0.3..0.7)) * slot;
        let k0 = ((centre * sample_rate_hz).round() as usize).min(n - 1);
        let target = match kind {
            FeatureKind::Overshoot => OVERSHOOT_PEAK,
            FeatureKind::Undershoot => UNDERSHOOT_TROUGH,
        };
        let height = target - values[k0];
        for (k, v) in values.iter_mut().enumerate() {
            let u = (k as f64 - k0 as f64) * dt / BUMP_WIDTH_S;
            if u.abs() < 6.0 {
                *v += height * (-0.5 * u * u).exp();
            }
        }
        features.push(Feature {
            kind,
            time_s: k0 as f64 * dt,
            value: target,
        });
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    Ok(Session {
        sample_rate_hz,
        values,
        features,
    })
}

impl Session {
    pub fn series_csv(&self) -> String {
        let mut out = String::from("time_s,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.4},{v:.6}", k as f64 / self.sample_rate_hz);
        }
        out
    }

    pub fn features_csv(&self) -> String {
        let mut out = String::from("kind,time_s,value\n");
        for f in &self.features {
            let _ = writeln!(out, "{},{:.4},{:.6}", f.kind.as_str(), f.time_s, f.value);
        }
        out
    }
}

/// `session.csv` -> `session.features.csv`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.features.csv"))
}

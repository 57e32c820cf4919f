//! Per-segment sound synthesis: a modified auditory graph.
//!
//! Every segment becomes one event `a(t) * Xi<sin(phi(t))>` where the
//! amplitude modulator `a` and the pitch exponent `b` are read from the
//! segment's data at data time `dilation * t`, and the phase integrates
//! `f_ref * 2^b(t)` at the audio rate.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::segmentation::{Polarity, Segment};

/// Length of the raised-cosine fade closing an envelope-shaped event.
pub const TAIL_FADE_S: f64 = 0.005;

pub const DEFAULT_AUDIO_RATE_HZ: f64 = 44_100.0;

/// Reference frequencies and pitch scales (octaves per data unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchSpec {
    pub f_up_hz: f64,
    pub f_down_hz: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl PitchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_up_hz.is_finite() && self.f_up_hz > 0.0) {
            return Err(Error::param("f_up", "must be positive"));
        }
        if !(self.f_down_hz.is_finite() && self.f_down_hz > 0.0) {
            return Err(Error::param("f_down", "must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::param("alpha", "must be non-negative"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param("beta", "must be non-negative"));
        }
        Ok(())
    }

    pub fn reference_for(&self, polarity: Polarity) -> f64 {
        match polarity {
            Polarity::Positive => self.f_up_hz,
            Polarity::Negative => self.f_down_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimbreKind {
    Identity,
    Harmonic,
    Subharmonic,
}

/// Additive timbre: `gain * sum_j j^-rolloff * sin(j*phi)` (harmonic) or
/// `sin(phi/j)` (subharmonic), `j = 1..=partials`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimbreSpec {
    pub kind: TimbreKind,
    pub partials: usize,
    pub rolloff: f64,
    pub gain: f64,
}

impl TimbreSpec {
    pub const IDENTITY: TimbreSpec = TimbreSpec {
        kind: TimbreKind::Identity,
        partials: 1,
        rolloff: 0.0,
        gain: 1.0,
    };

    pub fn harmonic(partials: usize, rolloff: f64, gain: f64) -> Self {
        Self {
            kind: TimbreKind::Harmonic,
            partials,
            rolloff,
            gain,
        }
    }

    pub fn subharmonic(partials: usize, rolloff: f64, gain: f64) -> Self {
        Self {
            kind: TimbreKind::Subharmonic,
            partials,
            rolloff,
            gain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.partials < 1 {
            return Err(Error::param("timbre_j", "at least one partial is required"));
        }
        if !(self.rolloff.is_finite() && self.rolloff >= 0.0) {
            return Err(Error::param("timbre_nu", "must be non-negative"));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::param("gain", "must be positive"));
        }
        Ok(())
    }

    /// Highest partial as a multiple of the fundamental.
    fn top_partial(&self) -> f64 {
        match self.kind {
            TimbreKind::Harmonic => self.partials as f64,
            _ => 1.0,
        }
    }
}

/// One synthesized audio snippet and its onset in sonification time.
#[derive(Debug, Clone, PartialEq)]
pub struct SonicEvent {
    pub onset_s: f64,
    pub audio: Vec<f64>,
    pub audio_rate_hz: f64,
    pub source_index: usize,
}

impl SonicEvent {
    pub fn duration_s(&self) -> f64 {
        self.audio.len() as f64 / self.audio_rate_hz
    }

    pub fn is_silent(&self) -> bool {
        self.audio.iter().all(|v| *v == 0.0)
    }
}

/// Number of audio samples for a segment of `duration_s` played at `dilation`.
pub fn event_len(duration_s: f64, dilation: f64, audio_rate_hz: f64) -> usize {
    (duration_s / dilation * audio_rate_hz).round() as usize
}

fn check_rate_and_dilation(dilation: f64, audio_rate_hz: f64) -> Result<()> {
    if !(dilation.is_finite() && dilation > 0.0) {
        return Err(Error::param(
            "dilation",
            format!("must be positive, got {dilation}"),
        ));
    }
    if !(audio_rate_hz.is_finite() && audio_rate_hz > 0.0) {
        return Err(Error::param("audio_rate_hz", "must be positive"));
    }
    Ok(())
}

/// `|x_i(dilation * k / rate)|` for every audio sample of the event.
fn magnitude_track(seg: &Segment, dilation: f64, audio_rate_hz: f64) -> Result<Vec<f64>> {
    Ok(data_track(seg, dilation, audio_rate_hz)?
        .into_iter()
        .map(f64::abs)
        .collect())
}

fn data_track(seg: &Segment, dilation: f64, audio_rate_hz: f64) -> Result<Vec<f64>> {
    check_rate_and_dilation(dilation, audio_rate_hz)?;
    let len = event_len(seg.duration_s, dilation, audio_rate_hz);
    Ok((0..len)
        .map(|k| seg.ac_at(dilation * k as f64 / audio_rate_hz))
        .collect())
}

/// Power-law amplitude modulator `|x_i(dilation * t)|^gamma`.
pub fn am_magnitude(
    seg: &Segment,
    dilation: f64,
    gamma: f64,
    audio_rate_hz: f64,
) -> Result<Vec<f64>> {
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(Error::param(
            "gamma",
            format!("must be at least 1, got {gamma}"),
        ));
    }
    let mut a = magnitude_track(seg, dilation, audio_rate_hz)?;
    if gamma != 1.0 {
        a.iter_mut().for_each(|v| *v = v.powf(gamma));
    }
    Ok(a)
}

/// Magnitude offset by `theta` followed by half-wave rectification.
pub fn halfwave(x: f64, theta: f64) -> f64 {
    if x >= theta {
        x - theta
    } else {
        0.0
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::param(
            "theta",
            format!("must be non-negative, got {theta}"),
        ));
    }
    Ok(())
}

pub fn am_halfwave_threshold(
    seg: &Segment,
    dilation: f64,
    theta: f64,
    audio_rate_hz: f64,
) -> Result<Vec<f64>> {
    check_theta(theta)?;
    Ok(magnitude_track(seg, dilation, audio_rate_hz)?
        .into_iter()
        .map(|v| halfwave(v, theta))
        .collect())
}

/// Whole-segment gate: the magnitude track if the segment ever reaches
/// `theta`, silence of the same length otherwise.
pub fn am_gate(seg: &Segment, dilation: f64, theta: f64, audio_rate_hz: f64) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let mut a = magnitude_track(seg, dilation, audio_rate_hz)?;
    if seg.max_mag < theta {
        a.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(a)
}

/// Attack-decay curve `max_mag * u * e^-(u-1)`, `u = dilation * t / tau`,
/// `tau = tau_factor * duration`, without the closing fade.
pub fn decay_envelope(
    seg: &Segment,
    dilation: f64,
    tau_factor: f64,
    audio_rate_hz: f64,
) -> Result<Vec<f64>> {
    check_rate_and_dilation(dilation, audio_rate_hz)?;
    if !(tau_factor.is_finite() && tau_factor > 0.0) {
        return Err(Error::param("tau_factor", "must be positive"));
    }
    let tau = tau_factor * seg.duration_s;
    let len = event_len(seg.duration_s, dilation, audio_rate_hz);
    Ok((0..len)
        .map(|k| {
            let u = dilation * k as f64 / audio_rate_hz / tau;
            seg.max_mag * u * (1.0 - u).exp()
        })
        .collect())
}

/// [`decay_envelope`] with a raised-cosine fade over its last [`TAIL_FADE_S`].
pub fn am_envelope(
    seg: &Segment,
    dilation: f64,
    tau_factor: f64,
    audio_rate_hz: f64,
) -> Result<Vec<f64>> {
    let mut a = decay_envelope(seg, dilation, tau_factor, audio_rate_hz)?;
    apply_tail_fade(&mut a, TAIL_FADE_S, audio_rate_hz);
    Ok(a)
}

/// Multiplies the tail by a half raised cosine falling to exactly zero.
pub fn apply_tail_fade(a: &mut [f64], fade_s: f64, audio_rate_hz: f64) {
    let fade = ((fade_s * audio_rate_hz).round() as usize).min(a.len());
    if fade == 0 {
        return;
    }
    let start = a.len() - fade;
    for (m, v) in a[start..].iter_mut().enumerate() {
        let x = (m + 1) as f64 / fade as f64;
        *v *= 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
    }
}

/// `alpha * trend_at_start + beta * x_ac(dilation * t)` per audio sample.
pub fn pitch_exponent(
    seg: &Segment,
    dilation: f64,
    spec: &PitchSpec,
    audio_rate_hz: f64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let offset = spec.alpha * seg.trend_at_start;
    Ok(data_track(seg, dilation, audio_rate_hz)?
        .into_iter()
        .map(|x| offset + spec.beta * x)
        .collect())
}

/// Applies the timbre operator to a running phase.
pub fn apply_timbre(phase: &[f64], timbre: &TimbreSpec) -> Vec<f64> {
    match timbre.kind {
        TimbreKind::Identity => phase.iter().map(|p| p.sin()).collect(),
        TimbreKind::Harmonic | TimbreKind::Subharmonic => {
            let weights: Vec<f64> = (1..=timbre.partials)
                .map(|j| timbre.gain * (j as f64).powf(-timbre.rolloff))
                .collect();
            let harmonic = timbre.kind == TimbreKind::Harmonic;
            phase
                .iter()
                .map(|&p| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            let j = (i + 1) as f64;
                            w * if harmonic {
                                (j * p).sin()
                            } else {
                                (p / j).sin()
                            }
                        })
                        .sum()
                })
                .collect()
        }
    }
}

/// Cumulative phase starting at zero: `phi[k] = phi[k-1] + 2 pi f 2^b[k-1] / rate`.
pub fn accumulate_phase(reference_hz: f64, b: &[f64], audio_rate_hz: f64) -> Vec<f64> {
    let step = TAU * reference_hz / audio_rate_hz;
    let mut phi = 0.0;
    b.iter()
        .map(|bk| {
            let current = phi;
            phi += step * bk.exp2();
            current
        })
        .collect()
}

/// Combines an amplitude modulator and pitch exponent into one event.
///
/// The onset is left at zero; the caller places the event in time.
pub fn synthesize_event(
    seg: &Segment,
    am: &[f64],
    b: &[f64],
    spec: &PitchSpec,
    timbre: &TimbreSpec,
    audio_rate_hz: f64,
) -> Result<SonicEvent> {
    if am.len() != b.len() {
        return Err(Error::Inconsistent(format!(
            "segment {}: amplitude length {} differs from pitch length {}",
            seg.index,
            am.len(),
            b.len()
        )));
    }
    spec.validate()?;
    timbre.validate()?;
    let reference = spec.reference_for(seg.polarity);
    let nyquist = audio_rate_hz / 2.0;
    let peak_hz = am
        .iter()
        .zip(b)
        .filter(|(a, _)| **a != 0.0)
        .map(|(_, bk)| reference * bk.exp2() * timbre.top_partial())
        .fold(0.0f64, f64::max);
    if peak_hz >= nyquist {
        return Err(Error::Aliasing {
            segment: seg.index,
            peak_hz,
            nyquist_hz: nyquist,
        });
    }
    let phase = accumulate_phase(reference, b, audio_rate_hz);
    let shaped = apply_timbre(&phase, timbre);
    let audio = am.iter().zip(shaped).map(|(a, s)| a * s).collect();
    Ok(SonicEvent {
        onset_s: 0.0,
        audio,
        audio_rate_hz,
        source_index: seg.index,
    })
}

/// Area-dependent dilation for excursion segments:
/// `dilation_0 * area_threshold / (sigma * area)` once the area reaches the
/// threshold, `dilation_0` otherwise.
pub fn dilation_for_segment(
    seg: &Segment,
    dilation_0: f64,
    sigma: f64,
    area_threshold: f64,
    is_excursion: bool,
) -> Result<f64> {
    if !(dilation_0.is_finite() && dilation_0 > 0.0) {
        return Err(Error::param("dilation_0", "must be positive"));
    }
    if !(sigma.is_finite() && sigma >= 1.0) {
        return Err(Error::param(
            "sigma",
            format!("must be at least 1, got {sigma}"),
        ));
    }
    if !(area_threshold.is_finite() && area_threshold > 0.0) {
        return Err(Error::param("area_threshold", "must be positive"));
    }
    if is_excursion && seg.area == 0.0 {
        log::warn!("segment {}: excursion with zero area", seg.index);
    }
    if !is_excursion || seg.area < area_threshold {
        return Ok(dilation_0);
    }
    Ok(area_threshold / (sigma * seg.area) * dilation_0)
}

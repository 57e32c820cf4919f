//! Preset sonification models for revolution-rate data and the reporting
//! helpers used in post-hoc review.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{bartlett_smooth, downsample, TimeSeries};
use crate::mixdown::{normalize, schedule_and_sum, RenderedAudio, DEFAULT_PEAK_DBFS};
use crate::segmentation::{extract_segments, find_cutting_points, Segment};
use crate::synth::{
    am_envelope, am_gate, am_magnitude, dilation_for_segment, pitch_exponent, synthesize_event,
    PitchSpec, SonicEvent, TimbreSpec, DEFAULT_AUDIO_RATE_HZ,
};
use crate::trend::{
    detrend, moving_average, weighted_trend, TrendDecomposition, DEFAULT_MA_WINDOW_S,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Basic,
    Itr,
    Adv,
    Audify,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Basic, Model::Itr, Model::Adv, Model::Audify];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Basic => "basic",
            Model::Itr => "itr",
            Model::Adv => "adv",
            Model::Audify => "audify",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model `{s}` (expected basic, itr, adv or audify)"))
    }
}

/// Acceptable range of the raw signal; outside it a segment is an excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub lo: f64,
    pub hi: f64,
}

/// Full parameter set of a rendering run.
#[derive(Debug, Clone, PartialEq)]
pub struct SonificationParams {
    pub model: Model,
    /// Time compression: data duration over sonification duration.
    pub kappa: f64,
    /// Data duration over event duration for ordinary segments.
    pub dilation_0: f64,
    pub pitch: PitchSpec,
    pub gamma: f64,
    pub theta: f64,
    pub w: f64,
    pub x_target: f64,
    pub ma_window_s: f64,
    pub limits: Limits,
    pub timbre_j: usize,
    pub timbre_nu: f64,
    pub gain_over: f64,
    pub gain_under: f64,
    pub area_threshold: f64,
    pub sigma: f64,
    pub tau_factor: f64,
    pub audio_rate_hz: f64,
    pub peak_dbfs: f64,
    /// Decimate inputs sampled faster than this rate.
    pub downsample_hz: Option<f64>,
    /// Triangular smoothing window in samples, applied after decimation.
    pub smooth_window: Option<usize>,
    /// Synthesis threads; 0 picks the rayon default, 1 runs inline.
    pub workers: usize,
}

impl SonificationParams {
    pub fn preset(model: Model) -> Self {
        let basic = Self {
            model,
            kappa: 5.0,
            dilation_0: 5.0,
            pitch: PitchSpec {
                f_up_hz: 400.0,
                f_down_hz: 300.0,
                alpha: 2.0,
                beta: 2.0,
            },
            gamma: 1.0,
            theta: 0.0,
            w: 0.2,
            x_target: 0.4,
            ma_window_s: DEFAULT_MA_WINDOW_S,
            limits: Limits { lo: 0.2, hi: 0.6 },
            timbre_j: 5,
            timbre_nu: 2.0,
            gain_over: 0.5,
            gain_under: 0.7,
            area_threshold: 1.0 / (8.0 * PI),
            sigma: 1.0,
            tau_factor: 0.13,
            audio_rate_hz: DEFAULT_AUDIO_RATE_HZ,
            peak_dbfs: DEFAULT_PEAK_DBFS,
            downsample_hz: Some(100.0),
            smooth_window: None,
            workers: 0,
        };
        match model {
            Model::Basic => basic,
            Model::Itr | Model::Adv => Self {
                kappa: 15.0,
                theta: 0.1,
                ..basic
            },
            Model::Audify => Self {
                kappa: 1.0,
                ..basic
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        positive("kappa", self.kappa)?;
        positive("dilation_0", self.dilation_0)?;
        positive("ma_window_s", self.ma_window_s)?;
        positive("area_threshold", self.area_threshold)?;
        positive("tau_factor", self.tau_factor)?;
        positive("audio_rate_hz", self.audio_rate_hz)?;
        self.pitch.validate()?;
        if !(self.gamma >= 1.0) {
            return Err(Error::param("gamma", "must be at least 1"));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::param("theta", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::param("w", "must lie in [0, 1]"));
        }
        if !self.x_target.is_finite() {
            return Err(Error::param("x_target", "must be finite"));
        }
        if !(self.limits.lo < self.limits.hi) {
            return Err(Error::param("limits", "lo must be below hi"));
        }
        if !(self.sigma >= 1.0) {
            return Err(Error::param("sigma", "must be at least 1"));
        }
        if !(self.peak_dbfs <= 0.0) {
            return Err(Error::param("peak_dbfs", "must be at most 0"));
        }
        self.overshoot_timbre().validate()?;
        self.undershoot_timbre().validate()?;
        if let Some(hz) = self.downsample_hz {
            positive("downsample_hz", hz)?;
        }
        Ok(())
    }

    pub fn overshoot_timbre(&self) -> TimbreSpec {
        TimbreSpec::harmonic(self.timbre_j, self.timbre_nu, self.gain_over)
    }

    pub fn undershoot_timbre(&self) -> TimbreSpec {
        TimbreSpec::subharmonic(self.timbre_j, self.timbre_nu, self.gain_under)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentClass {
    Normal,
    Overshoot,
    Undershoot,
}

impl SegmentClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentClass::Normal => "normal",
            SegmentClass::Overshoot => "overshoot",
            SegmentClass::Undershoot => "undershoot",
        }
    }
}

/// Classifies a segment by its raw extremes against the limits.
pub fn classify_segment(seg: &Segment, limits: Limits) -> SegmentClass {
    let over = seg.raw_max() > limits.hi;
    let under = seg.raw_min() < limits.lo;
    if over && under {
        log::warn!(
            "segment {} crosses both limits; treating it as an overshoot",
            seg.index
        );
    }
    if over {
        SegmentClass::Overshoot
    } else if under {
        SegmentClass::Undershoot
    } else {
        SegmentClass::Normal
    }
}

/// Decimation and optional smoothing ahead of trend estimation.
pub fn preprocess(ts: &TimeSeries, params: &SonificationParams) -> Result<TimeSeries> {
    let mut out = match params.downsample_hz {
        Some(target) if ts.sample_rate_hz() > target => downsample(ts, target)?,
        _ => ts.clone(),
    };
    if let Some(window) = params.smooth_window {
        out = bartlett_smooth(&out, window)?;
    }
    Ok(out)
}

/// Everything derived from the data before synthesis.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub series: TimeSeries,
    pub decomposition: TrendDecomposition,
    pub cuts: Vec<usize>,
    pub segments: Vec<Segment>,
}

pub fn analyze(ts: &TimeSeries, params: &SonificationParams) -> Result<Analysis> {
    params.validate()?;
    let series = preprocess(ts, params)?;
    let ma = moving_average(&series, params.ma_window_s)?;
    let trend = weighted_trend(&ma, params.x_target, params.w)?;
    let decomposition = detrend(&series, &trend)?;
    let cuts = find_cutting_points(&decomposition.ac);
    let segments = extract_segments(&decomposition, &series, &cuts)?;
    Ok(Analysis {
        series,
        decomposition,
        cuts,
        segments,
    })
}

/// Synthesizes one segment under `params.model` and places it at
/// `start_time / kappa`.
pub fn render_segment(seg: &Segment, params: &SonificationParams) -> Result<SonicEvent> {
    let rate = params.audio_rate_hz;
    let d0 = params.dilation_0;
    let (am, dilation, timbre) = match params.model {
        Model::Basic => (
            am_magnitude(seg, d0, params.gamma, rate)?,
            d0,
            TimbreSpec::IDENTITY,
        ),
        Model::Itr => (
            am_gate(seg, d0, params.theta, rate)?,
            d0,
            TimbreSpec::IDENTITY,
        ),
        Model::Adv => match classify_segment(seg, params.limits) {
            SegmentClass::Normal => (
                am_gate(seg, d0, params.theta, rate)?,
                d0,
                TimbreSpec::IDENTITY,
            ),
            class => {
                let d = dilation_for_segment(seg, d0, params.sigma, params.area_threshold, true)?;
                let timbre = if class == SegmentClass::Overshoot {
                    params.overshoot_timbre()
                } else {
                    params.undershoot_timbre()
                };
                (am_envelope(seg, d, params.tau_factor, rate)?, d, timbre)
            }
        },
        Model::Audify => {
            return Err(Error::Inconsistent(
                "audification does not render per-segment events".into(),
            ))
        }
    };
    let b = pitch_exponent(seg, dilation, &params.pitch, rate)?;
    let mut event = synthesize_event(seg, &am, &b, &params.pitch, &timbre, rate)?;
    event.onset_s = seg.start_time_s / params.kappa;
    Ok(event)
}

/// Renders every segment, in parallel when `workers != 1`. Output order and
/// the reported error (the lowest failing segment) do not depend on the
/// worker count.
pub fn render_segments(
    segments: &[Segment],
    params: &SonificationParams,
) -> Result<Vec<SonicEvent>> {
    let results: Vec<Result<SonicEvent>> = if params.workers == 1 {
        segments.iter().map(|s| render_segment(s, params)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.workers)
            .build()
            .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;
        pool.install(|| {
            segments
                .par_iter()
                .map(|s| render_segment(s, params))
                .collect()
        })
    };
    results.into_iter().collect()
}

pub fn render_model(ts: &TimeSeries, params: &SonificationParams) -> Result<Vec<SonicEvent>> {
    if params.model == Model::Audify {
        params.validate()?;
        let series = preprocess(ts, params)?;
        return render_audify(&series, params.audio_rate_hz);
    }
    let analysis = analyze(ts, params)?;
    render_segments(&analysis.segments, params)
}

/// One single-sample event per data point carrying the signed value.
pub fn render_audify(ts: &TimeSeries, playback_rate_hz: f64) -> Result<Vec<SonicEvent>> {
    if !(playback_rate_hz.is_finite() && playback_rate_hz > 0.0) {
        return Err(Error::param("playback_rate_hz", "must be positive"));
    }
    Ok(ts
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &v)| SonicEvent {
            onset_s: n as f64 / playback_rate_hz,
            audio: vec![v],
            audio_rate_hz: playback_rate_hz,
            source_index: n + 1,
        })
        .collect())
}

/// Full pipeline down to a normalized buffer.
pub fn render_audio(ts: &TimeSeries, params: &SonificationParams) -> Result<RenderedAudio> {
    let events = render_model(ts, params)?;
    let mix = schedule_and_sum(&events, params.audio_rate_hz)?;
    normalize(&mix, params.peak_dbfs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTop {
    pub start_s: f64,
    pub duration_s: f64,
}

pub const DEFAULT_FLAT_TOP_MIN_S: f64 = 0.5;
pub const DEFAULT_FLAT_TOP_RANGE: f64 = 0.02;

/// Maximal stretches in which every window of `min_duration_s` varies by at
/// most `max_range`.
pub fn detect_flat_tops(
    ts: &TimeSeries,
    min_duration_s: f64,
    max_range: f64,
) -> Result<Vec<FlatTop>> {
    if !(min_duration_s.is_finite() && min_duration_s > 0.0) {
        return Err(Error::param("min_duration_s", "must be positive"));
    }
    let rate = ts.sample_rate_hz();
    let x = ts.samples();
    let width = ((min_duration_s * rate).round() as usize).max(1);
    if width > x.len() {
        return Ok(Vec::new());
    }
    let calm: Vec<bool> = x
        .windows(width)
        .map(|w| {
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(*v), hi.max(*v))
                });
            hi - lo <= max_range
        })
        .collect();

    let mut tops = Vec::new();
    let mut k = 0;
    while k < calm.len() {
        if !calm[k] {
            k += 1;
            continue;
        }
        let first = k;
        while k < calm.len() && calm[k] {
            k += 1;
        }
        let samples = k - 1 - first + width;
        tops.push(FlatTop {
            start_s: first as f64 / rate,
            duration_s: samples as f64 / rate,
        });
    }
    Ok(tops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExcursionKind {
    Overshoot,
    Undershoot,
    /// Trend-free magnitude reached the individual target deviation.
    Deviation,
}

impl ExcursionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExcursionKind::Overshoot => "overshoot",
            ExcursionKind::Undershoot => "undershoot",
            ExcursionKind::Deviation => "deviation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub segment: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub kind: ExcursionKind,
}

/// Report rows for limit crossings and target-deviation breaches.
pub fn detect_excursions(segments: &[Segment], limits: Limits, theta: f64) -> Vec<Excursion> {
    let mut rows = Vec::new();
    for seg in segments {
        let row = |kind| Excursion {
            segment: seg.index,
            start_s: seg.start_time_s,
            duration_s: seg.duration_s,
            kind,
        };
        match classify_segment(seg, limits) {
            SegmentClass::Overshoot => rows.push(row(ExcursionKind::Overshoot)),
            SegmentClass::Undershoot => rows.push(row(ExcursionKind::Undershoot)),
            SegmentClass::Normal => {}
        }
        if seg.max_mag >= theta {
            rows.push(row(ExcursionKind::Deviation));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn seg_with_raw(raw: Vec<f64>) -> Segment {
        let ac: Vec<f64> = raw.iter().map(|v| v - 0.4).collect();
        Segment::from_samples(1, 0, ac, raw, 0.4, 0.0, 100.0, 0.0)
    }

    #[test]
    fn preset_values() {
        let b = SonificationParams::preset(Model::Basic);
        assert_eq!((b.kappa, b.dilation_0, b.gamma), (5.0, 5.0, 1.0));
        assert_eq!((b.pitch.f_up_hz, b.pitch.f_down_hz), (400.0, 300.0));
        assert_eq!((b.pitch.alpha, b.pitch.beta), (2.0, 2.0));
        assert_eq!((b.x_target, b.w), (0.4, 0.2));
        assert_eq!(b.limits, Limits { lo: 0.2, hi: 0.6 });

        let i = SonificationParams::preset(Model::Itr);
        assert_eq!((i.kappa, i.dilation_0, i.theta), (15.0, 5.0, 0.1));
        assert_eq!(i.pitch, b.pitch);

        let a = SonificationParams::preset(Model::Adv);
        assert_eq!((a.kappa, a.theta), (15.0, 0.1));
        assert_eq!((a.timbre_j, a.timbre_nu, a.sigma), (5, 2.0, 1.0));
        assert_eq!((a.gain_over, a.gain_under), (0.5, 0.7));
        assert!((a.area_threshold - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert_eq!(a.tau_factor, 0.13);
        for m in Model::ALL {
            SonificationParams::preset(m).validate().unwrap();
            assert_eq!(m.as_str().parse::<Model>().unwrap(), m);
        }
    }

    #[test]
    fn classification() {
        let limits = Limits { lo: 0.2, hi: 0.6 };
        assert_eq!(
            classify_segment(&seg_with_raw(vec![0.45, 0.7, 0.5]), limits),
            SegmentClass::Overshoot
        );
        assert_eq!(
            classify_segment(&seg_with_raw(vec![0.3, 0.15, 0.3]), limits),
            SegmentClass::Undershoot
        );
        assert_eq!(
            classify_segment(&seg_with_raw(vec![0.25, 0.55, 0.4]), limits),
            SegmentClass::Normal
        );
        assert_eq!(
            classify_segment(&seg_with_raw(vec![0.1, 0.7]), limits),
            SegmentClass::Overshoot
        );
    }

    #[test]
    fn flat_top_examples() {
        let flat = TimeSeries::new(vec![0.4; 100], 100.0).unwrap();
        assert_eq!(
            detect_flat_tops(&flat, 0.5, 0.02).unwrap(),
            vec![FlatTop {
                start_s: 0.0,
                duration_s: 1.0
            }]
        );

        let sine = TimeSeries::new(
            (0..300)
                .map(|n| 0.4 + 0.1 * (TAU * n as f64 / 100.0).sin())
                .collect(),
            100.0,
        )
        .unwrap();
        assert!(detect_flat_tops(&sine, 0.5, 0.02).unwrap().is_empty());

        // 49 constant samples between steep ramps
        let mut x: Vec<f64> = (0..30).map(|n| 0.1 * n as f64).collect();
        x.extend(std::iter::repeat_n(3.0, 49));
        x.extend((0..30).map(|n| 3.1 + 0.1 * n as f64));
        let short = TimeSeries::new(x.clone(), 100.0).unwrap();
        assert!(detect_flat_tops(&short, 0.5, 0.02).unwrap().is_empty());

        let mut y: Vec<f64> = (0..30).map(|n| 0.1 * n as f64).collect();
        y.extend(std::iter::repeat_n(3.0, 50));
        y.extend((0..30).map(|n| 3.1 + 0.1 * n as f64));
        let exact = TimeSeries::new(y, 100.0).unwrap();
        let tops = detect_flat_tops(&exact, 0.5, 0.02).unwrap();
        assert_eq!(tops.len(), 1);
        assert!((tops[0].start_s - 0.30).abs() < 1e-12);
        assert!((tops[0].duration_s - 0.50).abs() < 1e-12);
    }

    #[test]
    fn excursion_rows() {
        let limits = Limits { lo: 0.2, hi: 0.6 };
        let calm = vec![
            seg_with_raw(vec![0.41, 0.45, 0.41]),
            seg_with_raw(vec![0.39, 0.35, 0.39]),
        ];
        assert!(detect_excursions(&calm, limits, 0.1).is_empty());

        let spike = vec![seg_with_raw(vec![0.41, 0.65, 0.41])];
        let rows = detect_excursions(&spike, limits, 1.0);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].kind, ExcursionKind::Overshoot);

        let rows = detect_excursions(&calm, limits, 0.0);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.kind == ExcursionKind::Deviation));
    }

    #[test]
    fn audify_events() {
        let ts = TimeSeries::new(vec![0.5, -0.5], 100.0).unwrap();
        let events = render_audify(&ts, 44_100.0).unwrap();
        assert_eq!(events.len(), 2);
        let mix = schedule_and_sum(&events, 44_100.0).unwrap();
        assert_eq!(mix.samples, vec![0.5, -0.5]);

        let flat = TimeSeries::new(vec![0.3; 64], 100.0).unwrap();
        let mix = schedule_and_sum(&render_audify(&flat, 8_000.0).unwrap(), 8_000.0).unwrap();
        assert_eq!(mix.samples, vec![0.3; 64]);
    }

    fn fluctuation(seconds: f64, amp: f64) -> TimeSeries {
        let n = (seconds * 100.0) as usize;
        TimeSeries::new(
            (0..n)
                .map(|k| 0.4 + amp * (TAU * 0.8 * k as f64 / 100.0).sin())
                .collect(),
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn itr_silences_quiet_data() {
        let ts = fluctuation(20.0, 0.05);
        let params = SonificationParams::preset(Model::Itr);
        let events = render_model(&ts, &params).unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.is_silent()));
    }

    #[test]
    fn adv_equals_itr_without_excursions() {
        let ts = fluctuation(20.0, 0.15);
        let itr = render_model(&ts, &SonificationParams::preset(Model::Itr)).unwrap();
        let adv = render_model(&ts, &SonificationParams::preset(Model::Adv)).unwrap();
        assert_eq!(itr, adv);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let ts = fluctuation(30.0, 0.25);
        let mut params = SonificationParams::preset(Model::Adv);
        params.workers = 1;
        let serial = render_model(&ts, &params).unwrap();
        params.workers = 4;
        assert_eq!(render_model(&ts, &params).unwrap(), serial);
    }

    #[test]
    fn preprocessing_decimates_fast_inputs() {
        let ts = TimeSeries::new(vec![0.4; 4000], 4000.0).unwrap();
        let params = SonificationParams::preset(Model::Basic);
        let out = preprocess(&ts, &params).unwrap();
        assert_eq!(out.sample_rate_hz(), 100.0);
        assert_eq!(out.len(), 100);
    }

    #[test]
    fn invalid_params_rejected() {
        let ts = fluctuation(5.0, 0.1);
        let mut p = SonificationParams::preset(Model::Basic);
        p.kappa = 0.0;
        assert!(render_model(&ts, &p).is_err());
        let mut p = SonificationParams::preset(Model::Basic);
        p.limits = Limits { lo: 0.6, hi: 0.2 };
        assert!(render_model(&ts, &p).is_err());
    }
}

//! Loading and preprocessing of the data-domain signal.
//!
//! Inputs arrive either as CSV (one value column with a known rate, or a
//! `time_s,value` pair) or as a mono PCM16 WAV file where every sample holds
//! one data point scaled against a full-scale value.

use std::path::Path;

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of a CSV time column.
pub const SPACING_TOLERANCE: f64 = 1e-6;

/// Full-scale value used when audified data is stored as PCM16.
pub const DEFAULT_FULL_SCALE: f64 = 2.0;

/// Default triangular smoothing window, in samples at 100 Hz.
pub const DEFAULT_BARTLETT_WINDOW: usize = 9;

/// A uniformly sampled, finite, real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::param(
                "sample_rate_hz",
                format!("must be positive, got {sample_rate_hz}"),
            ));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.len() < 2 {
            return Err(Error::param("samples", "at least two samples are required"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("samples", format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Where a CSV loader takes the sample rate from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSource {
    Fixed(f64),
    FromTimeColumn,
}

pub fn load_csv(path: impl AsRef<Path>, rate: RateSource) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, rate)
}

/// Parses CSV content; a non-numeric first row is treated as a header.
pub fn read_csv<R: std::io::Read>(reader: R, rate: RateSource) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header row
                width = Some(record.len());
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("non-numeric field: {e}"),
                })
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {bad}"),
            });
        }
        if !matches!(values.len(), 1 | 2) {
            return Err(Error::Parse {
                line,
                message: format!("expected 1 or 2 columns, found {}", values.len()),
            });
        }
        if let Some((_, first)) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push((line, values));
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    if rows[0].1.len() == 1 {
        let RateSource::Fixed(hz) = rate else {
            return Err(Error::param(
                "sample_rate_hz",
                "single-column input needs an explicit sample rate",
            ));
        };
        let samples = rows.into_iter().map(|(_, v)| v[0]).collect();
        return TimeSeries::new(samples, hz);
    }

    if rows.len() < 2 {
        return Err(Error::param(
            "samples",
            "at least two rows are needed to infer the rate",
        ));
    }
    let t_first = rows[0].1[0];
    let t_last = rows[rows.len() - 1].1[0];
    let mean_dt = (t_last - t_first) / (rows.len() - 1) as f64;
    if !(mean_dt > 0.0) {
        return Err(Error::NonUniformSpacing { line: rows[1].0 });
    }
    for pair in rows.windows(2) {
        let dt = pair[1].1[0] - pair[0].1[0];
        if dt <= 0.0 || (dt - mean_dt).abs() > SPACING_TOLERANCE * mean_dt {
            return Err(Error::NonUniformSpacing { line: pair[1].0 });
        }
    }
    let inferred = 1.0 / mean_dt;
    if let RateSource::Fixed(hz) = rate {
        if (hz - inferred).abs() > SPACING_TOLERANCE * hz {
            return Err(Error::param(
                "sample_rate_hz",
                format!("{hz} Hz disagrees with the time column ({inferred} Hz)"),
            ));
        }
    }
    let samples = rows.into_iter().map(|(_, v)| v[1]).collect();
    TimeSeries::new(samples, inferred)
}

/// Reads a mono PCM16 WAV file; each integer maps to `i / 32768 * full_scale`.
pub fn load_wav_pcm16(path: impl AsRef<Path>, full_scale_value: f64) -> Result<TimeSeries> {
    if !(full_scale_value.is_finite() && full_scale_value > 0.0) {
        return Err(Error::param("full_scale_value", "must be positive"));
    }
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Decode(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels, expected mono",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}-bit {:?}, expected 16-bit PCM",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let expected = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0 * full_scale_value))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Decode(e.to_string()))?;
    if samples.len() != expected {
        return Err(Error::Decode(format!(
            "header declares {expected} samples, found {}",
            samples.len()
        )));
    }
    TimeSeries::new(samples, spec.sample_rate as f64)
}

/// Stores a series as mono PCM16, the inverse of [`load_wav_pcm16`].
pub fn write_pcm16(ts: &TimeSeries, path: impl AsRef<Path>, full_scale_value: f64) -> Result<()> {
    if !(full_scale_value.is_finite() && full_scale_value > 0.0) {
        return Err(Error::param("full_scale_value", "must be positive"));
    }
    let rate = ts.sample_rate_hz().round();
    if (rate - ts.sample_rate_hz()).abs() > 1e-9 * rate || rate > u32::MAX as f64 {
        return Err(Error::UnsupportedFormat(format!(
            "WAV needs an integer sample rate, got {}",
            ts.sample_rate_hz()
        )));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &v in ts.samples() {
        let q = (v / full_scale_value * 32768.0)
            .round()
            .clamp(-32768.0, 32767.0);
        writer.write_sample(q as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Block-mean decimation by an integer factor. A trailing partial block is dropped.
pub fn downsample(ts: &TimeSeries, target_rate_hz: f64) -> Result<TimeSeries> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::param("target_rate_hz", "must be positive"));
    }
    let ratio = ts.sample_rate_hz() / target_rate_hz;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::UnsupportedRatio {
            from_hz: ts.sample_rate_hz(),
            to_hz: target_rate_hz,
        });
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(ts.clone());
    }
    let samples: Vec<f64> = ts
        .samples()
        .chunks_exact(factor)
        .map(|block| block.iter().sum::<f64>() / factor as f64)
        .collect();
    TimeSeries::new(samples, target_rate_hz)
}

/// Triangular kernel of odd length `len`, normalized to unity DC gain.
pub fn bartlett_kernel(len: usize) -> Vec<f64> {
    let half = len.div_ceil(2);
    let raw: Vec<f64> = (0..len)
        .map(|k| (half - k.abs_diff(half - 1)) as f64)
        .collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / norm).collect()
}

/// Convolves with a normalized triangular kernel, replicating edge samples.
pub fn bartlett_smooth(ts: &TimeSeries, window_len_samples: usize) -> Result<TimeSeries> {
    let len = window_len_samples;
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::param(
            "window_len_samples",
            format!("must be odd and at least 3, got {len}"),
        ));
    }
    if len > ts.len() {
        return Err(Error::param(
            "window_len_samples",
            format!("{len} exceeds the series length {}", ts.len()),
        ));
    }
    let kernel = bartlett_kernel(len);
    let smoothed = convolve_edge_replicated(ts.samples(), &kernel);
    TimeSeries::new(smoothed, ts.sample_rate_hz())
}

/// Centered convolution with an odd-length kernel and edge-replication padding.
pub(crate) fn convolve_edge_replicated(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (kernel.len() / 2) as isize;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = (i + k as isize - half).clamp(0, n - 1);
                    w * x[j as usize]
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn csv(text: &str, rate: RateSource) -> Result<TimeSeries> {
        read_csv(text.as_bytes(), rate)
    }

    #[test]
    fn single_column_with_rate() {
        let ts = csv("0.4\n0.4\n0.4\n", RateSource::Fixed(100.0)).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.sample_rate_hz(), 100.0);
        assert_relative_eq!(ts.duration_s(), 0.03);
    }

    #[test]
    fn two_columns_infer_rate() {
        let ts = csv(
            "time_s,value\n0.00,0.4\n0.01,0.5\n",
            RateSource::FromTimeColumn,
        )
        .unwrap();
        assert_relative_eq!(ts.sample_rate_hz(), 100.0, max_relative = 1e-12);
        assert_eq!(ts.samples(), &[0.4, 0.5]);
    }

    #[test]
    fn alternating_spacing_rejected() {
        let err = csv(
            "0.00,1\n0.01,1\n0.03,1\n0.04,1\n0.06,1\n",
            RateSource::FromTimeColumn,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonUniformSpacing { .. }), "{err}");
    }

    #[test]
    fn non_numeric_row_reports_line() {
        let err = csv("value\n0.1\n0.2\nabc\n", RateSource::Fixed(100.0)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_and_header_only_inputs() {
        assert!(matches!(
            csv("", RateSource::Fixed(1.0)),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            csv("value\n", RateSource::Fixed(1.0)),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn single_column_needs_rate() {
        assert!(matches!(
            csv("1\n2\n", RateSource::FromTimeColumn),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for v in [32767i16, 0, -32768] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let ts = load_wav_pcm16(&path, 2.0).unwrap();
        assert_relative_eq!(ts.samples()[0], 1.99994, epsilon = 1e-5);
        assert_eq!(ts.samples()[1], 0.0);
        assert_eq!(ts.samples()[2], -2.0);
        assert_eq!(ts.sample_rate_hz(), 100.0);
    }

    #[test]
    fn stereo_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..8 {
            w.write_sample(1i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(
            load_wav_pcm16(&path, 2.0),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn float_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 100,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav_pcm16(&path, 2.0),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncated_wav_is_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let ts = TimeSeries::new(vec![0.1; 100], 100.0).unwrap();
        write_pcm16(&ts, &path, 2.0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 51]).unwrap();
        assert!(matches!(load_wav_pcm16(&path, 2.0), Err(Error::Decode(_))));
    }

    #[test]
    fn downsample_counts_and_means() {
        let ts = TimeSeries::new((0..400).map(|i| i as f64).collect(), 4000.0).unwrap();
        let out = downsample(&ts, 100.0).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out.sample_rate_hz(), 100.0);

        let ts = TimeSeries::new(vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0, 1.0], 400.0).unwrap();
        let out = downsample(&ts, 100.0).unwrap();
        assert_relative_eq!(out.samples()[0], 0.5, epsilon = 1e-15);

        let ts = TimeSeries::new(vec![0.37; 4000], 4000.0).unwrap();
        let out = downsample(&ts, 100.0).unwrap();
        assert!(out.samples().iter().all(|v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn downsample_rejects_fractional_ratio() {
        let ts = TimeSeries::new(vec![0.0; 300], 300.0).unwrap();
        assert!(matches!(
            downsample(&ts, 200.0),
            Err(Error::UnsupportedRatio { .. })
        ));
    }

    #[test]
    fn bartlett_impulse_response() {
        let mut x = vec![0.0; 7];
        x[3] = 1.0;
        let ts = TimeSeries::new(x, 100.0).unwrap();
        let y = bartlett_smooth(&ts, 3).unwrap();
        assert_eq!(y.samples(), &[0.0, 0.0, 0.25, 0.5, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn bartlett_constant_is_preserved() {
        let ts = TimeSeries::new(vec![0.42; 50], 100.0).unwrap();
        for len in [3, 5, 9, 21] {
            let y = bartlett_smooth(&ts, len).unwrap();
            assert!(y.samples().iter().all(|v| (v - 0.42).abs() < 1e-14));
        }
    }

    /// Triangle of length 2h-1 equals two successive boxes of length h.
    fn double_box_oracle(x: &[f64], len: usize) -> Vec<f64> {
        let h = len.div_ceil(2);
        let pad = h - 1;
        let mut padded = vec![x[0]; pad];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(x[x.len() - 1], pad));
        let boxed = |v: &[f64]| -> Vec<f64> {
            v.windows(h)
                .map(|w| w.iter().sum::<f64>() / h as f64)
                .collect()
        };
        boxed(&boxed(&padded))
    }

    #[test]
    fn bartlett_step_matches_double_box() {
        let x: Vec<f64> = (0..12).map(|i| if i < 6 { 0.0 } else { 1.0 }).collect();
        let ts = TimeSeries::new(x.clone(), 100.0).unwrap();
        let y = bartlett_smooth(&ts, 5).unwrap();
        let oracle = double_box_oracle(&x, 5);
        for (a, b) in y.samples().iter().zip(&oracle) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        // monotone ramp with exactly four intermediate values
        let s = y.samples();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
        let ramp = s
            .iter()
            .filter(|v| **v > 1e-12 && **v < 1.0 - 1e-12)
            .count();
        assert_eq!(ramp, 4);
    }

    #[test]
    fn bartlett_rejects_bad_windows() {
        let ts = TimeSeries::new(vec![0.0; 5], 100.0).unwrap();
        assert!(bartlett_smooth(&ts, 4).is_err());
        assert!(bartlett_smooth(&ts, 1).is_err());
        assert!(bartlett_smooth(&ts, 7).is_err());
    }

    #[test]
    fn time_series_invariants() {
        assert!(TimeSeries::new(vec![1.0], 100.0).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN], 100.0).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn pcm16_round_trip(ints in proptest::collection::vec(any::<i16>(), 2..200)) {
            let dir = tempfile::tempdir().unwrap();
            let a = dir.path().join("a.wav");
            let b = dir.path().join("b.wav");
            let spec = hound::WavSpec { channels: 1, sample_rate: 100, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
            let mut w = hound::WavWriter::create(&a, spec).unwrap();
            for &v in &ints { w.write_sample(v).unwrap(); }
            w.finalize().unwrap();
            let ts = load_wav_pcm16(&a, 2.0).unwrap();
            write_pcm16(&ts, &b, 2.0).unwrap();
            let back: Vec<i16> = hound::WavReader::open(&b).unwrap().into_samples::<i16>().map(|s| s.unwrap()).collect();
            prop_assert_eq!(back, ints);
        }

        #[test]
        fn downsample_preserves_block_mean(x in proptest::collection::vec(-10.0f64..10.0, 8..300), m in 1usize..8) {
            let ts = TimeSeries::new(x.clone(), 100.0 * m as f64).unwrap();
            prop_assume!(x.len() / m >= 2);
            let out = downsample(&ts, 100.0).unwrap();
            let kept = &x[..out.len() * m];
            let mean_in = kept.iter().sum::<f64>() / kept.len() as f64;
            let mean_out = out.samples().iter().sum::<f64>() / out.len() as f64;
            prop_assert!((mean_in - mean_out).abs() <= 1e-12 * mean_in.abs().max(1.0));
        }

        #[test]
        fn bartlett_is_linear(
            pair in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9..120),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let s = |v: &[f64]| bartlett_smooth(&TimeSeries::new(v.to_vec(), 100.0).unwrap(), 9).unwrap().into_samples();
            let (sx, sy, sm) = (s(&x), s(&y), s(&mix));
            for i in 0..sm.len() {
                prop_assert!((sm[i] - (a * sx[i] + b * sy[i])).abs() <= 1e-9);
            }
        }
    }
}

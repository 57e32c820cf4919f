//! Cutting the trend-free signal at its zero crossings.
//!
//! Cuts are sample aligned: a cut index is the first sample of the new
//! segment. The first cut is always 0 and the last is the sample count, so
//! every sample belongs to exactly one segment.

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::trend::TrendDecomposition;

/// Values within this fraction of the largest |ac| count as exact zeros.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Segments shorter than this are merged into a neighbour.
pub const MIN_SEGMENT_SAMPLES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

/// One slice of the data between consecutive cutting points.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// 1-based position in the segment sequence.
    pub index: usize,
    pub start_sample: usize,
    pub start_time_s: f64,
    pub duration_s: f64,
    pub ac: Vec<f64>,
    pub raw: Vec<f64>,
    pub trend_at_start: f64,
    pub polarity: Polarity,
    pub max_mag: f64,
    pub area: f64,
    pub sample_rate_hz: f64,
    /// Trend-free value at the closing cut (first sample of the next segment).
    pub end_ac: f64,
    /// No sample differs from zero; polarity was assigned, not observed.
    pub zero_only: bool,
}

impl Segment {
    /// Builds a segment from its samples, deriving the cached statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        index: usize,
        start_sample: usize,
        ac: Vec<f64>,
        raw: Vec<f64>,
        trend_at_start: f64,
        end_ac: f64,
        sample_rate_hz: f64,
        zero_tolerance: f64,
    ) -> Self {
        debug_assert_eq!(ac.len(), raw.len());
        let (peak, max_mag) = ac.iter().fold((0.0f64, 0.0f64), |(peak, mag), &v| {
            if v.abs() > mag {
                (v, v.abs())
            } else {
                (peak, mag)
            }
        });
        let zero_only = max_mag <= zero_tolerance;
        let polarity = if peak < 0.0 && !zero_only {
            Polarity::Negative
        } else {
            Polarity::Positive
        };
        let area = ac.iter().map(|v| v.abs()).sum::<f64>() / sample_rate_hz;
        Self {
            index,
            start_sample,
            start_time_s: start_sample as f64 / sample_rate_hz,
            duration_s: ac.len() as f64 / sample_rate_hz,
            ac,
            raw,
            trend_at_start,
            polarity,
            max_mag,
            area,
            sample_rate_hz,
            end_ac,
            zero_only,
        }
    }

    pub fn len(&self) -> usize {
        self.ac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ac.is_empty()
    }

    /// Trend-free value at `t` seconds into the segment, linearly interpolated
    /// between samples and towards `end_ac` at `t = duration_s`.
    pub fn ac_at(&self, t: f64) -> f64 {
        let n = self.ac.len();
        let pos = (t * self.sample_rate_hz).clamp(0.0, n as f64);
        let j = pos.floor() as usize;
        if j >= n {
            return self.end_ac;
        }
        let frac = pos - j as f64;
        let next = if j + 1 < n {
            self.ac[j + 1]
        } else {
            self.end_ac
        };
        if frac == 0.0 {
            self.ac[j]
        } else {
            self.ac[j] + frac * (next - self.ac[j])
        }
    }

    pub fn raw_max(&self) -> f64 {
        self.raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn raw_min(&self) -> f64 {
        self.raw.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn zero_threshold(ac: &[f64]) -> f64 {
    ZERO_TOLERANCE * ac.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn sign(v: f64, tol: f64) -> i8 {
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

/// Sample indices of the cutting points, starting at 0 and ending at `ac.len()`.
///
/// An interior cut falls on every sample whose sign differs from a nonzero
/// predecessor, and on the first sample of every run of zeros.
pub fn find_cutting_points(ac: &[f64]) -> Vec<usize> {
    let tol = zero_threshold(ac);
    let mut cuts = vec![0];
    for n in 1..ac.len() {
        let prev = sign(ac[n - 1], tol);
        let cur = sign(ac[n], tol);
        if prev != 0 && cur != prev {
            cuts.push(n);
        }
    }
    cuts.push(ac.len());
    cuts
}

/// Slices the decomposition at `cuts`, merging slices shorter than two samples.
pub fn extract_segments(
    decomp: &TrendDecomposition,
    raw: &TimeSeries,
    cuts: &[usize],
) -> Result<Vec<Segment>> {
    let n = decomp.ac.len();
    if raw.len() != n || decomp.trend.len() != n {
        return Err(Error::Inconsistent(format!(
            "raw length {}, trend length {}, ac length {n}",
            raw.len(),
            decomp.trend.len()
        )));
    }
    if cuts.first() != Some(&0) || cuts.last() != Some(&n) || cuts.len() < 2 {
        return Err(Error::Inconsistent(format!(
            "cuts must run from 0 to {n}, got {:?}..{:?}",
            cuts.first(),
            cuts.last()
        )));
    }
    if cuts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Inconsistent(
            "cuts are not strictly increasing".into(),
        ));
    }

    let mut ranges: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let mut i = 0;
    while i < ranges.len() {
        let (start, end) = ranges[i];
        if end - start >= MIN_SEGMENT_SAMPLES || ranges.len() == 1 {
            i += 1;
        } else if i + 1 < ranges.len() {
            ranges[i + 1].0 = start;
            ranges.remove(i);
        } else {
            ranges[i - 1].1 = end;
            ranges.remove(i);
        }
    }

    let tol = zero_threshold(&decomp.ac);
    let rate = decomp.source_rate_hz;
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(k, (start, end))| {
            let end_ac = if end < n {
                decomp.ac[end]
            } else {
                decomp.ac[n - 1]
            };
            Segment::from_samples(
                k + 1,
                start,
                decomp.ac[start..end].to_vec(),
                raw.samples()[start..end].to_vec(),
                decomp.trend[start],
                end_ac,
                rate,
                tol,
            )
        })
        .collect())
}

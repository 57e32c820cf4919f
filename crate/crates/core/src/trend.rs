//! Trend estimation and removal.

use crate::error::{Error, Result};
use crate::ingest::{convolve_edge_replicated, TimeSeries};

/// One footplate revolution at the 0.4 Hz optimum.
pub const DEFAULT_MA_WINDOW_S: f64 = 2.5;

/// A source signal split into a slow trend and a trend-free residual.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendDecomposition {
    pub trend: Vec<f64>,
    pub ac: Vec<f64>,
    pub source_rate_hz: f64,
}

impl TrendDecomposition {
    pub fn len(&self) -> usize {
        self.ac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ac.is_empty()
    }
}

/// Number of taps used for a centered moving average of `window_s` seconds.
pub fn moving_average_taps(window_s: f64, sample_rate_hz: f64) -> Result<usize> {
    if !(window_s.is_finite() && window_s * sample_rate_hz >= 2.0) {
        return Err(Error::param(
            "ma_window_s",
            format!("{window_s} s is shorter than two samples at {sample_rate_hz} Hz"),
        ));
    }
    let taps = (window_s * sample_rate_hz).round() as usize;
    Ok(if taps.is_multiple_of(2) {
        taps + 1
    } else {
        taps
    })
}

/// Centered moving mean with edge replication; output length equals input.
pub fn moving_average(ts: &TimeSeries, window_s: f64) -> Result<Vec<f64>> {
    let taps = moving_average_taps(window_s, ts.sample_rate_hz())?;
    let kernel = vec![1.0 / taps as f64; taps];
    Ok(convolve_edge_replicated(ts.samples(), &kernel))
}

/// `w * x_target + (1 - w) * ma`, elementwise.
pub fn weighted_trend(ma: &[f64], x_target: f64, w: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::param("w", format!("must lie in [0, 1], got {w}")));
    }
    Ok(ma.iter().map(|m| w * x_target + (1.0 - w) * m).collect())
}

pub fn detrend(ts: &TimeSeries, trend: &[f64]) -> Result<TrendDecomposition> {
    if trend.len() != ts.len() {
        return Err(Error::param(
            "trend",
            format!(
                "length {} does not match series length {}",
                trend.len(),
                ts.len()
            ),
        ));
    }
    let ac = ts.samples().iter().zip(trend).map(|(x, t)| x - t).collect();
    Ok(TrendDecomposition {
        trend: trend.to_vec(),
        ac,
        source_rate_hz: ts.sample_rate_hz(),
    })
}

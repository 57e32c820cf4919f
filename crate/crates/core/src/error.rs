use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(
        "line {line}: sample spacing deviates from the mean interval by more than 1e-6 relative"
    )]
    NonUniformSpacing { line: u64 },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("sample rate {from_hz} Hz is not an integer multiple of {to_hz} Hz")]
    UnsupportedRatio { from_hz: f64, to_hz: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("segment {segment}: instantaneous frequency {peak_hz:.1} Hz reaches the Nyquist limit {nyquist_hz:.1} Hz")]
    Aliasing {
        segment: usize,
        peak_hz: f64,
        nyquist_hz: f64,
    },

    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error("sample {index} = {value} lies outside [-1, 1]; normalize before 16-bit output")]
    OutOfRange { index: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("png: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Segment index carried by the error, if any.
    pub fn segment(&self) -> Option<usize> {
        match self {
            Error::Aliasing { segment, .. } => Some(*segment),
            _ => None,
        }
    }
}

//! Direct segmented sonification of one-dimensional time series.
//!
//! A series is split at the zero crossings of its trend-free component; each
//! segment becomes an independent sonic event (an amplitude- and
//! pitch-modulated tone read from the segment's own data) and the events are
//! overlap-added at onsets scaled by a time-compression factor, so the
//! rhythm of the cutting points survives in the output.
//!
//! Pipeline: [`ingest`] → [`trend`] → [`segmentation`] → [`synth`] (driven by
//! a preset from [`models`]) → [`mixdown`].

// NaN-rejecting checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ingest;
pub mod mixdown;
pub mod models;
pub mod segmentation;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
pub use ingest::TimeSeries;
pub use mixdown::RenderedAudio;
pub use models::{Model, SonificationParams};
pub use segmentation::Segment;
pub use synth::SonicEvent;

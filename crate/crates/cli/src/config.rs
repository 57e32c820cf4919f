//! Layered run configuration: preset defaults, then a `key = value` file,
//! then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use dsson_core::mixdown::BitDepth;
use dsson_core::models::{Model, SonificationParams};

use crate::error::{CliError, Stage};

macro_rules! param_overrides {
    ($( $(#[$meta:meta])* $field:ident : $ty:ty => |$p:ident, $v:ident| $apply:expr ;)*) => {
        /// Optional overrides for every tunable parameter.
        #[derive(Debug, Clone, Default, PartialEq, Args)]
        pub struct ParamOverrides {
            $( $(#[$meta])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        impl ParamOverrides {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Sets one field from its textual form; `Ok(false)` for unknown keys.
            pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
                match key {
                    $( stringify!($field) => {
                        let parsed = value.parse::<$ty>().map_err(|e| format!("{}: {e}", key.replace('_', "-")))?;
                        self.$field = Some(parsed);
                        Ok(true)
                    } )*
                    _ => Ok(false),
                }
            }

            /// Field-wise merge; values in `self` win.
            pub fn or(self, lower: ParamOverrides) -> ParamOverrides {
                ParamOverrides { $( $field: self.$field.or(lower.$field), )* }
            }

            pub fn apply(&self, params: &mut SonificationParams) {
                $( if let Some($v) = self.$field { let $p = &mut *params; $apply; } )*
            }
        }
    };
}

param_overrides! {
    /// Time compression factor (data duration / sonification duration).
    kappa: f64 => |p, v| p.kappa = v;
    /// Dilation for ordinary segments (data duration / event duration).
    dilation_0: f64 => |p, v| p.dilation_0 = v;
    /// Reference frequency for positive segments, Hz.
    f_up: f64 => |p, v| p.pitch.f_up_hz = v;
    /// Reference frequency for negative segments, Hz.
    f_down: f64 => |p, v| p.pitch.f_down_hz = v;
    /// Trend pitch scale, octaves per data unit.
    alpha: f64 => |p, v| p.pitch.alpha = v;
    /// Trend-free pitch scale, octaves per data unit.
    beta: f64 => |p, v| p.pitch.beta = v;
    /// Power-law exponent of the magnitude modulator.
    gamma: f64 => |p, v| p.gamma = v;
    /// Target deviation threshold.
    theta: f64 => |p, v| p.theta = v;
    /// Weight of the fixed target in the trend.
    w: f64 => |p, v| p.w = v;
    x_target: f64 => |p, v| p.x_target = v;
    /// Moving-average window, seconds.
    ma_window_s: f64 => |p, v| p.ma_window_s = v;
    limit_lo: f64 => |p, v| p.limits.lo = v;
    limit_hi: f64 => |p, v| p.limits.hi = v;
    /// Number of partials of the excursion timbres.
    timbre_j: usize => |p, v| p.timbre_j = v;
    /// Partial amplitude rolloff exponent.
    timbre_nu: f64 => |p, v| p.timbre_nu = v;
    gain_over: f64 => |p, v| p.gain_over = v;
    gain_under: f64 => |p, v| p.gain_under = v;
    /// Area above which excursion events are stretched.
    area_threshold: f64 => |p, v| p.area_threshold = v;
    sigma: f64 => |p, v| p.sigma = v;
    /// Envelope decay as a fraction of the segment duration.
    tau_factor: f64 => |p, v| p.tau_factor = v;
    audio_rate_hz: f64 => |p, v| p.audio_rate_hz = v;
    peak_dbfs: f64 => |p, v| p.peak_dbfs = v;
    /// Decimate faster inputs to this rate (0 disables).
    downsample_hz: f64 => |p, v| p.downsample_hz = (v > 0.0).then_some(v);
    /// Triangular smoothing window in samples (0 disables).
    smooth_window: usize => |p, v| p.smooth_window = (v > 0).then_some(v);
    /// Synthesis threads (0 = all cores, 1 = inline).
    workers: usize => |p, v| p.workers = v;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Csv,
    Wav,
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputKind::Csv),
            "wav" => Ok(InputKind::Wav),
            other => Err(format!(
                "unknown input kind `{other}` (expected csv or wav)"
            )),
        }
    }
}

impl InputKind {
    pub fn from_path(path: &Path) -> InputKind {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("wav") => InputKind::Wav,
            _ => InputKind::Csv,
        }
    }
}

/// One configuration layer. Every field is optional so layers can be stacked.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Layer {
    /// Preset: basic, itr, adv or audify.
    #[arg(long)]
    pub model: Option<Model>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub input_kind: Option<InputKind>,
    /// Sample rate of a single-column CSV, Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Value represented by PCM16 full scale in WAV inputs.
    #[arg(long)]
    pub full_scale: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a spectrogram of the rendering.
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Analysis report path (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// 16 or 32float.
    #[arg(long)]
    pub bit_depth: Option<BitDepth>,
    #[command(flatten)]
    pub params: ParamOverrides,
}

impl Layer {
    pub fn or(self, lower: Layer) -> Layer {
        Layer {
            model: self.model.or(lower.model),
            input: self.input.or(lower.input),
            input_kind: self.input_kind.or(lower.input_kind),
            rate: self.rate.or(lower.rate),
            full_scale: self.full_scale.or(lower.full_scale),
            out: self.out.or(lower.out),
            png: self.png.or(lower.png),
            report: self.report.or(lower.report),
            bit_depth: self.bit_depth.or(lower.bit_depth),
            params: self.params.or(lower.params),
        }
    }

    /// Parses `key = value` lines. Keys use kebab-case or snake_case;
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Layer, String> {
        let mut layer = Layer::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let err = |e: String| format!("line {}: {e}", n + 1);
            match key.as_str() {
                "model" => layer.model = Some(value.parse().map_err(err)?),
                "input" => layer.input = Some(PathBuf::from(value)),
                "input_kind" => layer.input_kind = Some(value.parse().map_err(err)?),
                "rate" => layer.rate = Some(value.parse().map_err(|e| err(format!("rate: {e}")))?),
                "full_scale" => {
                    layer.full_scale =
                        Some(value.parse().map_err(|e| err(format!("full-scale: {e}")))?)
                }
                "out" => layer.out = Some(PathBuf::from(value)),
                "png" => layer.png = Some(PathBuf::from(value)),
                "report" => layer.report = Some(PathBuf::from(value)),
                "bit_depth" => layer.bit_depth = Some(value.parse().map_err(err)?),
                other => {
                    if !layer.params.set(other, value).map_err(err)? {
                        return Err(err(format!("unknown key `{}`", other.replace('_', "-"))));
                    }
                }
            }
        }
        Ok(layer)
    }

    pub fn load(path: &Path) -> Result<Layer, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(Stage::Config, format!("{}: {e}", path.display())))?;
        Layer::parse(&text)
            .map_err(|e| CliError::usage(Stage::Config, format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub input_kind: Option<InputKind>,
    pub rate: Option<f64>,
    pub full_scale: f64,
    pub out: Option<PathBuf>,
    pub png: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub bit_depth: BitDepth,
    pub params: SonificationParams,
}

impl RunConfig {
    /// Applies the preset, then `file`, then `flags`.
    pub fn resolve(flags: Layer, file: Option<Layer>, default_model: Model) -> RunConfig {
        let merged = flags.or(file.unwrap_or_default());
        let model = merged.model.unwrap_or(default_model);
        let mut params = SonificationParams::preset(model);
        merged.params.apply(&mut params);
        RunConfig {
            input: merged.input,
            input_kind: merged.input_kind,
            rate: merged.rate,
            full_scale: merged
                .full_scale
                .unwrap_or(dsson_core::ingest::DEFAULT_FULL_SCALE),
            out: merged.out,
            png: merged.png,
            report: merged.report,
            bit_depth: merged.bit_depth.unwrap_or(BitDepth::Pcm16),
            params,
        }
    }
}

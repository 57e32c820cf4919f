//! Command-line front end for the `dsson` sonification pipeline.

pub mod config;
pub mod error;
pub mod testdata;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dsson_core::ingest::{load_csv, load_wav_pcm16, RateSource, TimeSeries};
use dsson_core::mixdown::{
    normalize, read_wav, schedule_and_sum, spectrogram_png, write_wav, StftSettings,
};
use dsson_core::models::{
    self, classify_segment, detect_excursions, detect_flat_tops, Model, DEFAULT_FLAT_TOP_MIN_S,
    DEFAULT_FLAT_TOP_RANGE,
};

pub use config::{InputKind, Layer, ParamOverrides, RunConfig};
pub use error::{CliError, Stage, StageContext};

#[derive(Debug, Parser)]
#[command(
    name = "dsson",
    version,
    about = "Sonify rate-of-revolution recordings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a data file to WAV (and optionally a spectrogram).
    #[command(allow_negative_numbers = true)]
    Render(RunArgs),
    /// Write the segment, excursion and flat-top report as CSV.
    #[command(allow_negative_numbers = true)]
    Analyze(AnalyzeArgs),
    /// Draw the spectrogram of a WAV file.
    Spectrogram(SpectrogramArgs),
    /// Generate a synthetic session and its feature sidecar.
    SynthesizeTestData(TestDataArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `key = value` file applied on top of the preset, below flags.
    #[arg(long, env = "DSSON_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub layer: Layer,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Shortest plateau reported as a flat top, seconds.
    #[arg(long, default_value_t = DEFAULT_FLAT_TOP_MIN_S)]
    pub flat_min_s: f64,
    /// Largest peak-to-peak variation inside a flat top.
    #[arg(long, default_value_t = DEFAULT_FLAT_TOP_RANGE)]
    pub flat_range: f64,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.023)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.75)]
    pub overlap: f64,
    #[arg(long, default_value_t = 4000.0)]
    pub max_freq_hz: f64,
}

#[derive(Debug, Args)]
pub struct TestDataArgs {
    /// steady, poor or novice.
    #[arg(long)]
    pub profile: testdata::Profile,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Session length, seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Render(args) => render(&resolve(args, Model::Basic)?),
        Command::Analyze(args) => {
            let cfg = resolve(args.run, Model::Itr)?;
            analyze(&cfg, args.flat_min_s, args.flat_range)
        }
        Command::Spectrogram(args) => spectrogram(&args),
        Command::SynthesizeTestData(args) => synthesize_test_data(&args),
    }
}

/// Builds the run configuration; `default_model` applies when neither the
/// file nor the flags name one.
pub fn resolve(args: RunArgs, default_model: Model) -> Result<RunConfig, CliError> {
    let file = args.config.as_deref().map(Layer::load).transpose()?;
    let cfg = RunConfig::resolve(args.layer, file, default_model);
    cfg.params
        .validate()
        .map_err(|e| CliError::usage(Stage::Config, e.to_string()))?;
    Ok(cfg)
}

pub fn load_input(cfg: &RunConfig) -> Result<TimeSeries, CliError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage(Stage::Ingest, "no input file given (use --input)"))?;
    if !path.exists() {
        return Err(CliError::usage(
            Stage::Ingest,
            format!("{}: no such file", path.display()),
        ));
    }
    let kind = cfg.input_kind.unwrap_or_else(|| InputKind::from_path(path));
    let ts = match kind {
        InputKind::Csv => {
            let rate = cfg
                .rate
                .map_or(RateSource::FromTimeColumn, RateSource::Fixed);
            load_csv(path, rate)
        }
        InputKind::Wav => load_wav_pcm16(path, cfg.full_scale),
    }
    .stage(Stage::Ingest)?;
    log::info!(
        "loaded {} samples at {} Hz ({:.2} s) from {}",
        ts.len(),
        ts.sample_rate_hz(),
        ts.duration_s(),
        path.display()
    );
    Ok(ts)
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::usage(Stage::Output, format!("no output given (use {flag})")))
}

pub fn render(cfg: &RunConfig) -> Result<(), CliError> {
    let out = require(&cfg.out, "--out")?;
    let ts = load_input(cfg)?;
    let p = &cfg.params;
    let events = if p.model == Model::Audify {
        models::render_model(&ts, p).stage(Stage::Synthesis)?
    } else {
        let analysis = models::analyze(&ts, p).stage(Stage::Analysis)?;
        log::info!("{} segments", analysis.segments.len());
        models::render_segments(&analysis.segments, p).stage(Stage::Synthesis)?
    };
    let mix = schedule_and_sum(&events, p.audio_rate_hz).stage(Stage::Mixdown)?;
    let audio = normalize(&mix, p.peak_dbfs).stage(Stage::Mixdown)?;
    write_wav(&audio, out, cfg.bit_depth).stage(Stage::Output)?;
    log::info!(
        "{} model: {:.3} s of audio written to {}",
        p.model,
        audio.duration_s(),
        out.display()
    );
    if let Some(png) = &cfg.png {
        spectrogram_png(&audio, png, &StftSettings::default()).stage(Stage::Output)?;
    }
    Ok(())
}

pub const REPORT_HEADER: [&str; 10] = [
    "record",
    "index",
    "start_time_s",
    "duration_s",
    "polarity",
    "max_mag",
    "area",
    "trend_at_start",
    "kind",
    "note",
];

/// Produces the analysis report as CSV text.
pub fn analysis_report(
    ts: &TimeSeries,
    cfg: &RunConfig,
    flat_min_s: f64,
    flat_range: f64,
) -> Result<String, CliError> {
    let p = &cfg.params;
    let analysis = models::analyze(ts, p).stage(Stage::Analysis)?;
    let excursions = detect_excursions(&analysis.segments, p.limits, p.theta);
    let flats =
        detect_flat_tops(&analysis.series, flat_min_s, flat_range).stage(Stage::Analysis)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::usage(Stage::Output, e.to_string());
    w.write_record(REPORT_HEADER).map_err(io)?;
    let f = |v: f64| format!("{v:.6}");
    for s in &analysis.segments {
        w.write_record([
            "segment".to_string(),
            s.index.to_string(),
            f(s.start_time_s),
            f(s.duration_s),
            s.polarity.as_str().to_string(),
            f(s.max_mag),
            f(s.area),
            f(s.trend_at_start),
            classify_segment(s, p.limits).as_str().to_string(),
            if s.zero_only { "zero-only" } else { "" }.to_string(),
        ])
        .map_err(io)?;
    }
    for e in &excursions {
        let s = &analysis.segments[e.segment - 1];
        w.write_record([
            "excursion".to_string(),
            e.segment.to_string(),
            f(e.start_s),
            f(e.duration_s),
            s.polarity.as_str().to_string(),
            f(s.max_mag),
            f(s.area),
            f(s.trend_at_start),
            e.kind.as_str().to_string(),
            String::new(),
        ])
        .map_err(io)?;
    }
    for (i, t) in flats.iter().enumerate() {
        w.write_record([
            "flat_top".to_string(),
            (i + 1).to_string(),
            f(t.start_s),
            f(t.duration_s),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            "flat_top".to_string(),
            String::new(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::usage(Stage::Output, e.to_string()))?;
    log::info!(
        "{} segments, {} excursion rows, {} flat tops",
        analysis.segments.len(),
        excursions.len(),
        flats.len()
    );
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn analyze(cfg: &RunConfig, flat_min_s: f64, flat_range: f64) -> Result<(), CliError> {
    let ts = load_input(cfg)?;
    let report = analysis_report(&ts, cfg, flat_min_s, flat_range)?;
    match &cfg.report {
        Some(path) => write_file(path, report.as_bytes()),
        None => std::io::stdout()
            .write_all(report.as_bytes())
            .map_err(|e| CliError::usage(Stage::Output, e.to_string())),
    }
}

pub fn spectrogram(args: &SpectrogramArgs) -> Result<(), CliError> {
    if !args.input.exists() {
        return Err(CliError::usage(
            Stage::Ingest,
            format!("{}: no such file", args.input.display()),
        ));
    }
    let audio = read_wav(&args.input).stage(Stage::Ingest)?;
    let settings = StftSettings {
        window_s: args.window_s,
        overlap: args.overlap,
        max_freq_hz: args.max_freq_hz,
    };
    spectrogram_png(&audio, &args.out, &settings).stage(Stage::Output)
}

pub fn synthesize_test_data(args: &TestDataArgs) -> Result<(), CliError> {
    let session = testdata::generate(args.profile, args.seed, args.duration, args.rate)
        .map_err(|e| CliError::usage(Stage::Config, e))?;
    write_file(&args.out, session.series_csv().as_bytes())?;
    let sidecar = testdata::sidecar_path(&args.out);
    write_file(&sidecar, session.features_csv().as_bytes())?;
    log::info!(
        "wrote {} samples and {} features to {} / {}",
        session.values.len(),
        session.features.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::usage(Stage::Output, format!("{}: {e}", path.display())))
}

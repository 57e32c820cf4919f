//! Placing events on the sonification timeline and writing the result.

use std::path::Path;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::synth::SonicEvent;

pub const DEFAULT_PEAK_DBFS: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedAudio {
    pub samples: Vec<f64>,
    pub audio_rate_hz: f64,
    /// Linear factor applied by normalization; 1 when untouched.
    pub applied_gain: f64,
}

impl RenderedAudio {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.audio_rate_hz
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sample offset at which an event starts.
pub fn onset_offset(onset_s: f64, audio_rate_hz: f64) -> usize {
    (onset_s * audio_rate_hz).round() as usize
}

/// Overlap-adds events at their onsets, accumulating in ascending
/// `source_index` order so the float sums are reproducible.
pub fn schedule_and_sum(events: &[SonicEvent], audio_rate_hz: f64) -> Result<RenderedAudio> {
    let mut order: Vec<&SonicEvent> = events.iter().collect();
    order.sort_by_key(|e| e.source_index);

    let mut len = 0;
    for e in &order {
        if !(e.onset_s >= 0.0 && e.onset_s.is_finite()) {
            return Err(Error::Inconsistent(format!(
                "event {} has onset {}",
                e.source_index, e.onset_s
            )));
        }
        if e.audio_rate_hz != audio_rate_hz {
            return Err(Error::Inconsistent(format!(
                "event {} rendered at {} Hz, mix at {} Hz",
                e.source_index, e.audio_rate_hz, audio_rate_hz
            )));
        }
        len = len.max(onset_offset(e.onset_s, audio_rate_hz) + e.audio.len());
    }

    let mut samples = vec![0.0; len];
    for e in order {
        let offset = onset_offset(e.onset_s, audio_rate_hz);
        for (dst, src) in samples[offset..].iter_mut().zip(&e.audio) {
            *dst += src;
        }
    }
    Ok(RenderedAudio {
        samples,
        audio_rate_hz,
        applied_gain: 1.0,
    })
}

/// Scales the buffer so its peak sits at `peak_dbfs`. Silence is left alone.
pub fn normalize(audio: &RenderedAudio, peak_dbfs: f64) -> Result<RenderedAudio> {
    if !(peak_dbfs.is_finite() && peak_dbfs <= 0.0) {
        return Err(Error::param(
            "peak_dbfs",
            format!("must be at most 0, got {peak_dbfs}"),
        ));
    }
    let peak = audio.peak();
    if peak == 0.0 {
        return Ok(RenderedAudio {
            applied_gain: 1.0,
            ..audio.clone()
        });
    }
    let gain = 10f64.powf(peak_dbfs / 20.0) / peak;
    Ok(RenderedAudio {
        samples: audio.samples.iter().map(|v| v * gain).collect(),
        audio_rate_hz: audio.audio_rate_hz,
        applied_gain: gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Float32,
}

impl std::str::FromStr for BitDepth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "16" | "pcm16" => Ok(BitDepth::Pcm16),
            "32float" | "float32" | "f32" => Ok(BitDepth::Float32),
            other => Err(format!(
                "unknown bit depth `{other}` (expected 16 or 32float)"
            )),
        }
    }
}

/// Quantizes one sample to PCM16, rounding to nearest and clamping at +-32767.
pub fn quantize_pcm16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32767.0, 32767.0) as i16
}

fn integer_rate(rate: f64) -> Result<u32> {
    let r = rate.round();
    if !(r >= 1.0 && r <= u32::MAX as f64) || (r - rate).abs() > 1e-9 * r {
        return Err(Error::UnsupportedFormat(format!(
            "WAV needs an integer sample rate, got {rate}"
        )));
    }
    Ok(r as u32)
}

pub fn write_wav(audio: &RenderedAudio, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let rate = integer_rate(audio.audio_rate_hz)?;
    if depth == BitDepth::Pcm16 {
        if let Some((index, &value)) = audio
            .samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= 1.0))
        {
            return Err(Error::OutOfRange { index, value });
        }
    }
    let spec = match depth {
        BitDepth::Pcm16 => hound::WavSpec {
            channels: 1,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        },
        BitDepth::Float32 => hound::WavSpec {
            channels: 1,
            sample_rate: rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    match depth {
        BitDepth::Pcm16 => {
            for &v in &audio.samples {
                writer.write_sample(quantize_pcm16(v))?;
            }
        }
        BitDepth::Float32 => {
            for &v in &audio.samples {
                writer.write_sample(v as f32)?;
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads a mono PCM16 or float32 WAV into unit-scaled samples.
pub fn read_wav(path: impl AsRef<Path>) -> Result<RenderedAudio> {
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
    let decode = |e: hound::Error| Error::Decode(e.to_string());
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(decode)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(decode)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit {fmt:?}")));
        }
    };
    Ok(RenderedAudio {
        samples,
        audio_rate_hz: spec.sample_rate as f64,
        applied_gain: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftSettings {
    pub window_s: f64,
    pub overlap: f64,
    pub max_freq_hz: f64,
}

impl Default for StftSettings {
    fn default() -> Self {
        Self {
            window_s: 0.023,
            overlap: 0.75,
            max_freq_hz: 4000.0,
        }
    }
}

/// Hann-windowed STFT magnitudes, one column per frame.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// `frames[t][k]` is the magnitude of bin `k` in frame `t`.
    pub frames: Vec<Vec<f64>>,
    pub bin_hz: f64,
    pub hop_s: f64,
    pub window_len: usize,
}

impl Spectrogram {
    /// Bin holding the largest magnitude in each frame.
    pub fn peak_bins(&self) -> Vec<usize> {
        self.frames
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &m)| {
                        if m > best.1 {
                            (k, m)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / len as f64).cos())
        .collect()
}

pub fn stft(samples: &[f64], audio_rate_hz: f64, settings: &StftSettings) -> Result<Spectrogram> {
    if !(settings.window_s > 0.0 && settings.window_s.is_finite()) {
        return Err(Error::param("window_s", "must be positive"));
    }
    if !(0.0..1.0).contains(&settings.overlap) {
        return Err(Error::param("overlap", "must lie in [0, 1)"));
    }
    let n = ((settings.window_s * audio_rate_hz).round() as usize).max(2);
    let hop = ((n as f64 * (1.0 - settings.overlap)).round() as usize).max(1);
    let window = hann(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let starts: Vec<usize> = if samples.len() <= n {
        vec![0]
    } else {
        (0..=samples.len() - n).step_by(hop).collect()
    };
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let frames = starts
        .into_iter()
        .map(|start| {
            for (k, slot) in buf.iter_mut().enumerate() {
                let x = samples.get(start + k).copied().unwrap_or(0.0);
                *slot = Complex::new(x * window[k], 0.0);
            }
            fft.process(&mut buf);
            buf[..=n / 2].iter().map(|c| c.norm()).collect()
        })
        .collect();
    Ok(Spectrogram {
        frames,
        bin_hz: audio_rate_hz / n as f64,
        hop_s: hop as f64 / audio_rate_hz,
        window_len: n,
    })
}

/// Dynamic range shown between black and white.
pub const SPECTROGRAM_RANGE_DB: f64 = 80.0;

/// Grayscale log-magnitude image: time left to right, frequency bottom to top.
pub fn spectrogram_image(spec: &Spectrogram, max_freq_hz: f64) -> (u32, u32, Vec<u8>) {
    let top_bin = ((max_freq_hz / spec.bin_hz).floor() as usize).min(spec.window_len / 2);
    let width = spec.frames.len();
    let height = top_bin + 1;
    let peak = spec
        .frames
        .iter()
        .flat_map(|f| f[..=top_bin].iter())
        .fold(0.0f64, |m, v| m.max(*v));
    let mut pixels = vec![0u8; width * height];
    if peak > 0.0 {
        let ceiling = 20.0 * peak.log10();
        for (x, frame) in spec.frames.iter().enumerate() {
            for (k, &m) in frame[..=top_bin].iter().enumerate() {
                let db = if m > 0.0 {
                    20.0 * m.log10()
                } else {
                    f64::NEG_INFINITY
                };
                let level = ((db - ceiling) / SPECTROGRAM_RANGE_DB + 1.0).clamp(0.0, 1.0);
                let y = top_bin - k;
                pixels[y * width + x] = (level * 255.0).round() as u8;
            }
        }
    }
    (width as u32, height as u32, pixels)
}

pub fn spectrogram_png(
    audio: &RenderedAudio,
    path: impl AsRef<Path>,
    settings: &StftSettings,
) -> Result<()> {
    let spec = stft(&audio.samples, audio.audio_rate_hz, settings)?;
    let (width, height, pixels) = spectrogram_image(&spec, settings.max_freq_hz);
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&pixels)?;
    writer.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    const RATE: f64 = 44_100.0;

    fn event(index: usize, onset_s: f64, audio: Vec<f64>) -> SonicEvent {
        SonicEvent {
            onset_s,
            audio,
            audio_rate_hz: RATE,
            source_index: index,
        }
    }

    #[test]
    fn onset_from_compression() {
        // boundary at 2.5 s, compression 5
        let e = event(2, 2.5 / 5.0, vec![1.0; 3]);
        let mix = schedule_and_sum(&[event(1, 0.0, vec![0.5; 2]), e], RATE).unwrap();
        assert_eq!(onset_offset(0.5, RATE), 22_050);
        assert_eq!(mix.samples.len(), 22_053);
        assert_eq!(mix.samples[22_050], 1.0);
        assert_eq!(mix.samples[1], 0.5);
        assert_eq!(mix.samples[2], 0.0);
    }

    #[test]
    fn overlapping_events_superpose() {
        let a = event(1, 0.0, vec![0.3; 100]);
        let b = event(2, 50.0 / RATE, vec![0.3; 100]);
        let mix = schedule_and_sum(&[a, b], RATE).unwrap();
        assert_eq!(mix.samples.len(), 150);
        assert!((mix.samples[75] - 0.6).abs() < 1e-15);
        assert_eq!(mix.samples[10], 0.3);
        assert_eq!(mix.samples[140], 0.3);
    }

    #[test]
    fn negative_onset_rejected() {
        assert!(matches!(
            schedule_and_sum(&[event(1, -0.1, vec![1.0])], RATE),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn accumulation_order_ignores_input_order() {
        let evs: Vec<SonicEvent> = (1..=20)
            .map(|i| {
                event(
                    i,
                    i as f64 * 7.0 / RATE,
                    (0..50).map(|k| ((i * k) as f64).sin() * 0.1).collect(),
                )
            })
            .collect();
        let forward = schedule_and_sum(&evs, RATE).unwrap();
        let mut shuffled = evs.clone();
        shuffled.reverse();
        shuffled.swap(3, 11);
        assert_eq!(schedule_and_sum(&shuffled, RATE).unwrap(), forward);
    }

    #[test]
    fn normalize_examples() {
        let a = RenderedAudio {
            samples: vec![0.5, -0.25],
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        let n = normalize(&a, -1.0).unwrap();
        assert!((n.applied_gain - 1.7825).abs() < 1e-4);
        assert!((n.peak() - 0.8913).abs() < 1e-4);
        assert!((n.peak() - 10f64.powf(-0.05)).abs() < 1e-12);

        let again = normalize(&n, -1.0).unwrap();
        assert!((again.applied_gain - 1.0).abs() < 1e-9);

        let silent = RenderedAudio {
            samples: vec![0.0; 10],
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        let s = normalize(&silent, -1.0).unwrap();
        assert_eq!(s, silent);
        assert!(normalize(&a, 1.0).is_err());
    }

    #[test]
    fn pcm16_quantization() {
        assert_eq!(quantize_pcm16(1.0), 32767);
        assert_eq!(quantize_pcm16(-1.0), -32767);
        assert_eq!(quantize_pcm16(0.0), 0);
        assert_eq!(quantize_pcm16(0.5), 16384);
    }

    #[test]
    fn pcm16_header_and_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let audio = RenderedAudio {
            samples: vec![0.1; 44_100],
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        write_wav(&audio, &path, BitDepth::Pcm16).unwrap();
        let reader = hound::WavReader::open(&path).unwrap();
        let spec = reader.spec();
        assert_eq!(spec.channels, 1);
        assert_eq!(spec.sample_rate, 44_100);
        assert_eq!(reader.duration(), 44_100);

        let loud = RenderedAudio {
            samples: vec![0.1, 1.2],
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        assert!(matches!(
            write_wav(&loud, &path, BitDepth::Pcm16),
            Err(Error::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let samples: Vec<f64> = (0..1000)
            .map(|k| ((k as f32 * 0.013).sin() * 0.9) as f64)
            .collect();
        let audio = RenderedAudio {
            samples: samples.clone(),
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        write_wav(&audio, &path, BitDepth::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, samples);
        assert_eq!(back.audio_rate_hz, RATE);
    }

    fn tone(f: f64, secs: f64) -> Vec<f64> {
        (0..(secs * RATE) as usize)
            .map(|k| (TAU * f * k as f64 / RATE).sin())
            .collect()
    }

    #[test]
    fn stft_ridge_at_tone() {
        let spec = stft(&tone(400.0, 0.5), RATE, &StftSettings::default()).unwrap();
        let expected = 400.0 / spec.bin_hz;
        for bin in spec.peak_bins() {
            assert!((bin as f64 - expected).abs() <= 1.0, "{bin} vs {expected}");
        }
    }

    #[test]
    fn stft_shows_harmonic_ridges() {
        let f0 = 300.0;
        let x: Vec<f64> = (0..22_050)
            .map(|k| {
                (1..=5)
                    .map(|j| (TAU * f0 * j as f64 * k as f64 / RATE).sin() / (j * j) as f64)
                    .sum()
            })
            .collect();
        let spec = stft(&x, RATE, &StftSettings::default()).unwrap();
        let frame = &spec.frames[spec.frames.len() / 2];
        for j in 1..=5 {
            let centre = (j as f64 * f0 / spec.bin_hz).round() as usize;
            let local = frame[centre - 1..=centre + 1]
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            let between = frame[((j as f64 + 0.5) * f0 / spec.bin_hz).round() as usize];
            assert!(local > 20.0 * between, "partial {j}");
        }
    }

    #[test]
    fn png_for_tone_and_silence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let audio = RenderedAudio {
            samples: tone(400.0, 0.5),
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        let settings = StftSettings::default();
        spectrogram_png(&audio, &path, &settings).unwrap();
        let decoder = png::Decoder::new(std::fs::File::open(&path).unwrap());
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).unwrap();
        let (w, h) = (info.width as usize, info.height as usize);
        let spec = stft(&audio.samples, RATE, &settings).unwrap();
        let col = w / 2;
        let brightest_row = (0..h).max_by_key(|&y| buf[y * w + col]).unwrap();
        let bin = h - 1 - brightest_row;
        assert!((bin as f64 - 400.0 / spec.bin_hz).abs() <= 1.0);

        let silent = RenderedAudio {
            samples: vec![0.0; 22_050],
            audio_rate_hz: RATE,
            applied_gain: 1.0,
        };
        let (_, _, px) =
            spectrogram_image(&stft(&silent.samples, RATE, &settings).unwrap(), 4000.0);
        assert!(px.iter().all(|p| *p == px[0]));
    }
}

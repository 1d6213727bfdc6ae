//! WAV input/output and band-limited resampling.
//!
//! Everything downstream works on mono [`AudioClip`]s at [`CANONICAL_RATE`].

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

/// Sample rate every augmenter expects (Hz).
pub const CANONICAL_RATE: u32 = 16_000;

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    Missing(PathBuf),
    #[error("malformed WAV header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("unsupported WAV encoding in {path}: {encoding}")]
    UnsupportedEncoding { path: PathBuf, encoding: String },
    #[error("cannot write {path}: {reason}")]
    Unwritable { path: PathBuf, reason: String },
    #[error("clip has no samples")]
    Empty,
    #[error("invalid sample rate {0} Hz")]
    InvalidRate(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub id: String,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate, id: id.into() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, &s| m.max(s.abs()))
    }

    /// Same id and rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self { samples, sample_rate: self.sample_rate, id: self.id.clone() }
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<(), AudioError> {
        if self.samples.is_empty() {
            Err(AudioError::Empty)
        } else {
            Ok(())
        }
    }
}

/// Reads a PCM16 or float32 WAV file, averaging channels down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => AudioError::Missing(path.to_path_buf()),
        _ => AudioError::Io { path: path.to_path_buf(), source: e },
    })?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| header_error(path, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(AudioError::MalformedHeader {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
            .collect::<Result<_, _>>()
            .map_err(|e| header_error(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| header_error(path, e))?,
        (format, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                path: path.to_path_buf(),
                encoding: format!("{format:?} {bits}-bit"),
            })
        }
    };

    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(AudioClip::new(id, samples, spec.sample_rate))
}

fn header_error(path: &Path, e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(source) => match source.kind() {
            std::io::ErrorKind::UnexpectedEof => AudioError::MalformedHeader {
                path: path.to_path_buf(),
                reason: "unexpected end of file".into(),
            },
            _ => AudioError::Io { path: path.to_path_buf(), source },
        },
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            path: path.to_path_buf(),
            encoding: "non-PCM/non-float format tag".into(),
        },
        other => AudioError::MalformedHeader { path: path.to_path_buf(), reason: other.to_string() },
    }
}

/// Writes a mono PCM16 WAV at the clip's rate. Samples beyond full scale are
/// saturated; the number of saturated samples is returned.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<usize, AudioError> {
    clip.ensure_non_empty()?;
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let unwritable = |e: hound::Error| AudioError::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut writer = WavWriter::create(path, spec).map_err(unwritable)?;
    let mut clipped = 0;
    for &s in &clip.samples {
        let (q, was_clipped) = quantize_pcm16(s);
        clipped += usize::from(was_clipped);
        writer.write_sample(q).map_err(unwritable)?;
    }
    writer.finalize().map_err(unwritable)?;
    Ok(clipped)
}

/// Writes a mono IEEE float32 WAV (no clipping). Used for impulse responses.
pub fn save_wav_f32(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    clip.ensure_non_empty()?;
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let unwritable = |e: hound::Error| AudioError::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut writer = WavWriter::create(path, spec).map_err(unwritable)?;
    for &s in &clip.samples {
        writer.write_sample(s as f32).map_err(unwritable)?;
    }
    writer.finalize().map_err(unwritable)
}

fn quantize_pcm16(s: f64) -> (i16, bool) {
    let clipped = !(-1.0..=1.0).contains(&s) || s.is_nan();
    let s = if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) };
    let q = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0);
    (q as i16, clipped)
}

/// Half-width of the resampling kernel in periods of the lower of the two
/// rates; the full kernel spans 128 such periods.
const KERNEL_HALF_PERIODS: f64 = 64.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.95;
/// Kaiser beta for roughly 80 dB stopband attenuation.
const KAISER_BETA: f64 = 7.857;

/// Band-limited (Kaiser-windowed sinc) sample-rate conversion.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate(target_rate));
    }
    if clip.sample_rate == 0 {
        return Err(AudioError::InvalidRate(clip.sample_rate));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }
    let in_rate = f64::from(clip.sample_rate);
    let out_rate = f64::from(target_rate);
    let ratio = out_rate / in_rate;
    let out_len = (clip.len() as f64 * ratio).round() as usize;

    // Cutoff in cycles per input sample, and the kernel half-width in input samples.
    let low_rate_scale = ratio.min(1.0);
    let cutoff = 0.5 * CUTOFF_FRACTION * low_rate_scale;
    let half_width = KERNEL_HALF_PERIODS / low_rate_scale;
    let window_norm = bessel_i0(KAISER_BETA);

    let x = &clip.samples;
    let samples = (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let first = (t - half_width).ceil().max(0.0) as usize;
            let last = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            (first..=last)
                .map(|k| {
                    let d = t - k as f64;
                    let r = d / half_width;
                    let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / window_norm;
                    x[k] * 2.0 * cutoff * sinc(2.0 * cutoff * d) * window
                })
                .sum()
        })
        .collect();
    Ok(AudioClip::new(clip.id.clone(), samples, target_rate))
}

/// Resamples to [`CANONICAL_RATE`] when needed.
pub fn canonicalize(clip: &AudioClip) -> Result<AudioClip, AudioError> {
    clip.ensure_non_empty()?;
    resample(clip, CANONICAL_RATE)
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, secs: f64, amp: f64) -> AudioClip {
        let n = (f64::from(rate) * secs) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
            .collect();
        AudioClip::new("tone", samples, rate)
    }

    fn write_raw(path: &Path, spec: WavSpec, samples: &[i32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            match spec.bits_per_sample {
                16 => w.write_sample(s as i16).unwrap(),
                _ => w.write_sample(s).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        write_raw(&path, spec, &vec![0; 16000]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.len(), 16000);
        assert_eq!(clip.sample_rate, 16000);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_opposite_channels_average_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = WavSpec { channels: 2, sample_rate: 16000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let frames: Vec<i32> = (0..200).flat_map(|_| [16384, -16384]).collect();
        write_raw(&path, spec, &frames);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.len(), 200);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_square_stays_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let square: Vec<i32> = (0..1600).map(|i| if (i / 40) % 2 == 0 { 32767 } else { -32768 }).collect();
        write_raw(&path, spec, &square);
        let clip = load_wav(&path).unwrap();
        // Oracle: integer / 32768.
        for (&s, &q) in clip.samples.iter().zip(&square) {
            assert!((-1.0..=1.0).contains(&s));
            assert_eq!(s, f64::from(q) / 32768.0);
        }
        assert!(clip.peak() >= 0.999);
    }

    #[test]
    fn float32_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let clip = tone(440.0, 8000, 0.1, 0.5);
        save_wav_f32(&clip, &path).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 8000);
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn distinct_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_wav(dir.path().join("nope.wav")), Err(AudioError::Missing(_))));

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"definitely not a riff file").unwrap();
        assert!(matches!(load_wav(&junk), Err(AudioError::MalformedHeader { .. })));

        let pcm24 = dir.path().join("pcm24.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 24, sample_format: SampleFormat::Int };
        write_raw(&pcm24, spec, &[0, 1, 2]);
        match load_wav(&pcm24) {
            Err(AudioError::UnsupportedEncoding { encoding, .. }) => assert!(encoding.contains("24")),
            other => panic!("expected unsupported encoding, got {other:?}"),
        }
    }

    #[test]
    fn save_round_trip_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let clip = tone(300.0, 16000, 0.5, 0.25);
        assert_eq!(save_wav(&clip, &path).unwrap(), 0);
        let back = load_wav(&path).unwrap();
        let max_err = clip.samples.iter().zip(&back.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max error {max_err}");
    }

    #[test]
    fn save_saturates_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.wav");
        let clip = AudioClip::new("c", vec![0.0, 1.5, -0.5], 16000);
        assert_eq!(save_wav(&clip, &path).unwrap(), 1);
        let back = load_wav(&path).unwrap();
        assert_eq!(back.samples[1], 32767.0 / 32768.0);
    }

    #[test]
    fn save_empty_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        let clip = AudioClip::new("e", vec![], 16000);
        assert!(matches!(save_wav(&clip, &path), Err(AudioError::Empty)));
        assert!(!path.exists());
    }

    #[test]
    fn unwritable_path_errors() {
        let clip = tone(100.0, 16000, 0.01, 0.1);
        let err = save_wav(&clip, "/nonexistent-dir/x/y.wav").unwrap_err();
        assert!(matches!(err, AudioError::Unwritable { .. }));
    }

    #[test]
    fn resample_identity_and_lengths() {
        let clip = tone(1000.0, 16000, 0.2, 0.5);
        assert_eq!(resample(&clip, 16000).unwrap(), clip);
        let long = tone(1000.0, 48000, 1.0, 0.5);
        let down = resample(&long, 16000).unwrap();
        assert!((down.len() as i64 - 16000).abs() <= 1);
        assert!(matches!(resample(&clip, 0), Err(AudioError::InvalidRate(0))));
    }

    #[test]
    fn resample_rejects_above_new_nyquist() {
        // 9 kHz at 48 kHz would alias to 7 kHz at 16 kHz.
        let clip = tone(9000.0, 48000, 0.5, 0.5);
        let down = resample(&clip, 16000).unwrap();
        let interior = &down.samples[1000..down.len() - 1000];
        let rms = (interior.iter().map(|s| s * s).sum::<f64>() / interior.len() as f64).sqrt();
        let in_rms = 0.5 / 2f64.sqrt();
        let atten_db = 20.0 * (in_rms / rms).log10();
        assert!(atten_db >= 60.0, "attenuation {atten_db} dB");
    }
}

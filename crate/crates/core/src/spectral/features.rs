use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::envelope::LOG_FLOOR;
use super::f0::{estimate_f0, PitchTrack};
use super::{hann, SpectralError};
use crate::audio_io::{AudioClip, CANONICAL_RATE};
use crate::seed;

/// Analysis frame length shared by features and pitch tracking (seconds).
pub const FRAME_SECS: f64 = 0.025;

/// Frame layout: frame `k` covers `[k*hop, k*hop + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGrid {
    pub hop: usize,
    pub len: usize,
    pub count: usize,
}

impl FrameGrid {
    pub fn centers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.count).map(move |k| k * self.hop + self.len / 2)
    }
}

/// `count = floor((n - len) / hop) + 1` for 25 ms frames; zero when the
/// signal is shorter than one frame.
pub fn frame_grid(samples: usize, rate: u32, frame_shift: f64) -> FrameGrid {
    let hop = ((frame_shift * f64::from(rate)).round() as usize).max(1);
    let len = (FRAME_SECS * f64::from(rate)).round() as usize;
    let count = if samples < len { 0 } else { (samples - len) / hop + 1 };
    FrameGrid { hop, len, count }
}

/// Row-major `frame_count × dim` mel-cepstral matrix. Column 0 is log frame
/// energy, columns `1..dim` are mel-cepstral coefficients `c1..c(dim-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Vec<f32>,
    pub frame_count: usize,
    pub dim: usize,
    pub frame_shift: f64,
}

impl FeatureMatrix {
    pub fn new(frames: Vec<f32>, frame_count: usize, dim: usize, frame_shift: f64) -> Self {
        assert_eq!(frames.len(), frame_count * dim, "feature buffer does not match shape");
        Self { frames, frame_count, dim, frame_shift }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.frames.chunks_exact(self.dim.max(1))
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        match self.frames.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(SpectralError::NonFinite(i / self.dim.max(1))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureConfig {
    pub frame_shift: f64,
    pub mel_bands: usize,
    /// Cepstral order; the matrix has `order + 1` columns.
    pub order: usize,
    pub fft_size: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { frame_shift: 0.005, mel_bands: 26, order: 24, fft_size: 512 }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Centre frequencies (Hz) of `bands` triangular filters spanning 0..nyquist,
/// plus the two edge points.
fn mel_points(bands: usize, nyquist: f64) -> Vec<f64> {
    let top = hz_to_mel(nyquist);
    (0..bands + 2).map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64)).collect()
}

fn mel_filterbank(bands: usize, fft_size: usize, rate: f64) -> Vec<Vec<f64>> {
    let points = mel_points(bands, rate / 2.0);
    let bin_hz = rate / fft_size as f64;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (points[b], points[b + 1], points[b + 2]);
            (0..=fft_size / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis value.
fn dct_basis(k: usize, m: usize, bands: usize) -> f64 {
    let scale = if k == 0 { (1.0 / bands as f64).sqrt() } else { (2.0 / bands as f64).sqrt() };
    scale * (PI * k as f64 * (m as f64 + 0.5) / bands as f64).cos()
}

/// Mel-cepstral analysis (25 ms Hamming frames, 5 ms shift, 26 mel bands,
/// log, DCT-II) plus the F0 track on the same frame grid.
pub fn extract_features(clip: &AudioClip) -> Result<(FeatureMatrix, PitchTrack), SpectralError> {
    extract_features_with(clip, &FeatureConfig::default())
}

pub fn extract_features_with(
    clip: &AudioClip,
    config: &FeatureConfig,
) -> Result<(FeatureMatrix, PitchTrack), SpectralError> {
    if clip.sample_rate != CANONICAL_RATE {
        return Err(SpectralError::SampleRate { expected: CANONICAL_RATE, actual: clip.sample_rate });
    }
    let grid = frame_grid(clip.len(), clip.sample_rate, config.frame_shift);
    if grid.count == 0 {
        return Err(SpectralError::TooShort { len: clip.len(), needed: grid.len });
    }
    let rate = f64::from(clip.sample_rate);
    let window: Vec<f64> =
        (0..grid.len).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (grid.len - 1) as f64).cos()).collect();
    let bank = mel_filterbank(config.mel_bands, config.fft_size, rate);
    let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
    let dim = config.order + 1;
    let mut buf = vec![Complex64::default(); config.fft_size];
    let mut frames = Vec::with_capacity(grid.count * dim);

    for k in 0..grid.count {
        let start = k * grid.hop;
        let mut energy = 0.0;
        for (i, b) in buf.iter_mut().enumerate() {
            let v = if i < grid.len { clip.samples[start + i] * window[i] } else { 0.0 };
            energy += v * v;
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=config.fft_size / 2].iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|filter| filter.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>().max(LOG_FLOOR).ln())
            .collect();

        frames.push(energy.max(LOG_FLOOR).ln() as f32);
        for c in 1..dim {
            let v: f64 = log_mel.iter().enumerate().map(|(m, &l)| l * dct_basis(c, m, config.mel_bands)).sum();
            frames.push(v as f32);
        }
    }

    let features = FeatureMatrix::new(frames, grid.count, dim, config.frame_shift);
    let pitch = estimate_f0(clip, config.frame_shift);
    debug_assert_eq!(pitch.len(), features.frame_count);
    Ok((features, pitch))
}

const SYNTH_FFT: usize = 1024;
const NOISE_SEED: u64 = 0x5e_ed0f_f00d;

/// Pulse/noise source-filter resynthesis from mel-cepstra. Output has
/// `frame_count × hop` samples at 16 kHz; voiced frames are excited by a
/// phase-continuous pulse train at the frame's F0.
pub fn synthesize_from_features(features: &FeatureMatrix, pitch: &PitchTrack) -> Result<AudioClip, SpectralError> {
    let frame_count = features.frame_count;
    if frame_count.abs_diff(pitch.len()) > 1 {
        return Err(SpectralError::FrameCountMismatch { features: frame_count, pitch: pitch.len() });
    }
    features.validate()?;
    let frames = frame_count.min(pitch.len());
    let rate = f64::from(CANONICAL_RATE);
    let grid = frame_grid(usize::MAX / 2, CANONICAL_RATE, features.frame_shift);
    let (hop, win) = (grid.hop, grid.len);
    let out_len = frames * hop;
    if frames == 0 {
        return Ok(AudioClip::new("synth", vec![], CANONICAL_RATE));
    }

    // Excitation: pulses on voiced frames, unit-variance noise elsewhere.
    let mut rng = seed::rng(NOISE_SEED);
    let mut phase = 0.0;
    let excitation: Vec<f64> = (0..out_len)
        .map(|t| {
            let f0 = pitch.f0[(t / hop).min(frames - 1)];
            if f0 > 0.0 {
                phase += f0 / rate;
                if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                }
            } else {
                phase = 1.0 - 1e-9; // next voiced frame starts with a pulse
                rng.sample::<f64, _>(StandardNormal)
            }
        })
        .collect();

    let dim = features.dim;
    let bands = FeatureConfig::default().mel_bands;
    let centers: Vec<f64> = mel_points(bands, rate / 2.0)[1..=bands].to_vec();
    let bin_hz = rate / SYNTH_FFT as f64;
    let window = hann(win);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(SYNTH_FFT);
    let ifft = planner.plan_fft_inverse(SYNTH_FFT);
    let offset = SYNTH_FFT / 2 - win / 2;
    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex64::default(); SYNTH_FFT];
    // Hann at hop = len/5 overlap-adds to len / (2 hop).
    let ola_gain = win as f64 / (2.0 * hop as f64);

    for k in 0..frames {
        let row = features.row(k);
        let log_mel: Vec<f64> = (0..bands)
            .map(|m| (1..dim.min(bands)).map(|c| f64::from(row[c]) * dct_basis(c, m, bands)).sum())
            .collect();
        let amplitude: Vec<f64> = (0..=SYNTH_FFT / 2)
            .map(|b| (0.5 * interpolate_bands(&centers, &log_mel, b as f64 * bin_hz)).exp())
            .collect();

        let center = (k * hop + hop / 2) as isize;
        let seg_start = center - (win / 2) as isize;
        buf.iter_mut().for_each(|b| *b = Complex64::default());
        for i in 0..win {
            let t = seg_start + i as isize;
            if t >= 0 && (t as usize) < out_len {
                buf[offset + i] = Complex64::new(excitation[t as usize] * window[i], 0.0);
            }
        }
        fft.process(&mut buf);
        for (b, c) in buf.iter_mut().enumerate() {
            *c *= amplitude[b.min(SYNTH_FFT - b)];
        }
        ifft.process(&mut buf);
        let filtered: Vec<f64> = buf.iter().map(|c| c.re / SYNTH_FFT as f64).collect();

        let synth_energy: f64 = filtered.iter().map(|v| v * v).sum();
        let target_energy = f64::from(row[0]).exp();
        let gain = if synth_energy > 1e-20 { (target_energy / synth_energy).sqrt() } else { 0.0 };

        let base = center - (SYNTH_FFT / 2) as isize;
        for (i, v) in filtered.iter().enumerate() {
            let t = base + i as isize;
            if t >= 0 && (t as usize) < out_len {
                out[t as usize] += v * gain / ola_gain;
            }
        }
    }
    Ok(AudioClip::new("synth", out, CANONICAL_RATE))
}

fn interpolate_bands(centers: &[f64], values: &[f64], f: f64) -> f64 {
    if f <= centers[0] {
        return values[0];
    }
    let last = centers.len() - 1;
    if f >= centers[last] {
        return values[last];
    }
    let i = centers.partition_point(|&c| c <= f) - 1;
    let t = (f - centers[i]) / (centers[i + 1] - centers[i]);
    values[i] + t * (values[i + 1] - values[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::median_voiced_f0;
    use crate::synth;

    #[test]
    fn one_second_gives_196_frames() {
        // floor((1.0 - 0.025) / 0.005) + 1
        let clip = synth::vowel(200.0, &synth::VOWEL_A, 1.0, 16000);
        let (feats, pitch) = extract_features(&clip).unwrap();
        assert_eq!(feats.frame_count, 196);
        assert_eq!(feats.dim, 25);
        assert_eq!(pitch.len(), 196);
        assert!((feats.frame_shift - 0.005).abs() < 1e-12);
    }

    #[test]
    fn silence_features_sit_on_the_floor() {
        let clip = AudioClip::new("s", vec![0.0; 8000], 16000);
        let (feats, _) = extract_features(&clip).unwrap();
        for row in feats.rows() {
            assert_eq!(row[0], LOG_FLOOR.ln() as f32);
            assert!(row[1..].iter().all(|c| c.abs() < 1e-4));
        }
    }

    #[test]
    fn deterministic() {
        let clip = synth::cvcv_word(210.0, 1.0, 16000, 9);
        let (a, pa) = extract_features(&clip).unwrap();
        let (b, pb) = extract_features(&clip.clone()).unwrap();
        assert_eq!(a.frames.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.frames.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(pa, pb);
    }

    #[test]
    fn too_short_and_wrong_rate() {
        let short = AudioClip::new("s", vec![0.0; 399], 16000);
        assert!(matches!(extract_features(&short), Err(SpectralError::TooShort { .. })));
        let wrong = AudioClip::new("w", vec![0.0; 8000], 8000);
        assert!(matches!(extract_features(&wrong), Err(SpectralError::SampleRate { .. })));
    }

    #[test]
    fn round_trip_preserves_f0_and_duration() {
        let clip = synth::vowel(200.0, &synth::VOWEL_A, 1.0, 16000);
        let (feats, pitch) = extract_features(&clip).unwrap();
        let out = synthesize_from_features(&feats, &pitch).unwrap();
        // 196 frames × 5 ms
        assert_eq!(out.len(), 196 * 80);
        assert!((out.duration_secs() - 0.98).abs() <= 0.005);
        let med = median_voiced_f0(&estimate_f0(&out, 0.005)).unwrap();
        assert!((med - 200.0).abs() <= 10.0, "median {med}");
        assert!(out.samples.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn unvoiced_track_gives_noise() {
        // Whole-clip normalised autocorrelation over the 50-600 Hz lag range.
        fn max_lag_correlation(x: &[f64]) -> f64 {
            let energy: f64 = x.iter().map(|v| v * v).sum();
            (16000 / 600..=16000 / 50)
                .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / energy)
                .fold(f64::MIN, f64::max)
        }
        let formants = [synth::Formant::new(700.0, 350.0), synth::Formant::new(1220.0, 400.0)];
        let clip = synth::vowel(200.0, &formants, 1.0, 16000);
        let (feats, pitch) = extract_features(&clip).unwrap();
        let noise = synthesize_from_features(&feats, &PitchTrack::unvoiced(pitch.len(), 0.005)).unwrap();
        let voiced = synthesize_from_features(&feats, &pitch).unwrap();
        let r_noise = max_lag_correlation(&noise.samples);
        let r_voiced = max_lag_correlation(&voiced.samples);
        assert!(r_noise < 0.1, "noise autocorrelation peak {r_noise}");
        assert!(r_voiced > 0.5, "voiced autocorrelation peak {r_voiced}");
    }

    #[test]
    fn frame_mismatch_tolerance() {
        let clip = synth::vowel(200.0, &synth::VOWEL_A, 0.3, 16000);
        let (feats, pitch) = extract_features(&clip).unwrap();
        let mut short = pitch.clone();
        short.truncate(pitch.len() - 1);
        assert!(synthesize_from_features(&feats, &short).is_ok());
        short.truncate(pitch.len() - 2);
        assert!(matches!(
            synthesize_from_features(&feats, &short),
            Err(SpectralError::FrameCountMismatch { .. })
        ));
    }
}

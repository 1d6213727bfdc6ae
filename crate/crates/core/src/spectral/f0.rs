use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::features::frame_grid;
use super::median;
use crate::audio_io::AudioClip;

/// Per-frame fundamental frequency; `f0 == 0` exactly on unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub f0: Vec<f64>,
    pub frame_shift: f64,
    pub voicing: Vec<bool>,
}

impl PitchTrack {
    pub fn from_f0(f0: Vec<f64>, frame_shift: f64) -> Self {
        let voicing = f0.iter().map(|&f| f > 0.0).collect();
        Self { f0, frame_shift, voicing }
    }

    pub fn unvoiced(frames: usize, frame_shift: f64) -> Self {
        Self::from_f0(vec![0.0; frames], frame_shift)
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.f0.is_empty() {
            return 0.0;
        }
        self.voicing.iter().filter(|&&v| v).count() as f64 / self.f0.len() as f64
    }

    pub fn truncate(&mut self, frames: usize) {
        self.f0.truncate(frames);
        self.voicing.truncate(frames);
    }
}

/// Median F0 over voiced frames, if any.
pub fn median_voiced_f0(track: &PitchTrack) -> Option<f64> {
    let mut voiced: Vec<f64> = track.f0.iter().copied().filter(|&f| f > 0.0).collect();
    median(&mut voiced)
}

#[derive(Debug, Clone, Copy)]
pub struct F0Config {
    pub min_f0: f64,
    pub max_f0: f64,
    /// Analysis window length (seconds) centred on each frame.
    pub window_secs: f64,
    /// Minimum peak normalized autocorrelation for a voiced decision.
    pub voicing_threshold: f64,
    /// Among lags whose correlation is within this fraction of the best, the
    /// shortest wins (suppresses octave-down errors).
    pub octave_tolerance: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self { min_f0: 50.0, max_f0: 600.0, window_secs: 0.040, voicing_threshold: 0.3, octave_tolerance: 0.9 }
    }
}

/// Autocorrelation F0 tracker on the shared frame grid (25 ms frames at
/// `frame_shift`), 50–600 Hz, voicing threshold 0.3, 3-point median filter
/// over voiced runs.
pub fn estimate_f0(clip: &AudioClip, frame_shift: f64) -> PitchTrack {
    estimate_f0_with(clip, frame_shift, &F0Config::default())
}

pub fn estimate_f0_with(clip: &AudioClip, frame_shift: f64, config: &F0Config) -> PitchTrack {
    let rate = f64::from(clip.sample_rate);
    let grid = frame_grid(clip.len(), clip.sample_rate, frame_shift);
    let window = (config.window_secs * rate).round() as usize;
    let min_lag = ((rate / config.max_f0).floor() as usize).max(2);
    let max_lag = (rate / config.min_f0).ceil() as usize;
    let nfft = (window + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let ifft = planner.plan_fft_inverse(nfft);
    let mut buf = vec![Complex64::default(); nfft];

    let raw: Vec<f64> = grid
        .centers()
        .map(|center| {
            let start = center.saturating_sub(window / 2);
            let end = (center + window / 2).min(clip.len());
            let segment = &clip.samples[start..end];
            frame_f0(segment, rate, min_lag, max_lag, config, &mut buf, fft.as_ref(), ifft.as_ref())
        })
        .collect();

    let smoothed = median_filter_voiced(&raw);
    PitchTrack::from_f0(smoothed, frame_shift)
}

#[allow(clippy::too_many_arguments)]
fn frame_f0(
    segment: &[f64],
    rate: f64,
    min_lag: usize,
    max_lag: usize,
    config: &F0Config,
    buf: &mut [Complex64],
    fft: &dyn rustfft::Fft<f64>,
    ifft: &dyn rustfft::Fft<f64>,
) -> f64 {
    let w = segment.len();
    let energy: f64 = segment.iter().map(|x| x * x).sum();
    if energy < 1e-12 || w < 2 * min_lag + 2 {
        return 0.0;
    }
    // At least half the window must overlap at the longest lag.
    let max_lag = max_lag.min(w / 2);
    if max_lag <= min_lag + 1 {
        return 0.0;
    }

    for (i, b) in buf.iter_mut().enumerate() {
        *b = Complex64::new(segment.get(i).copied().unwrap_or(0.0), 0.0);
    }
    fft.process(buf);
    for b in buf.iter_mut() {
        *b = Complex64::new(b.norm_sqr(), 0.0);
    }
    ifft.process(buf);
    let n = buf.len() as f64;

    // prefix[i] = sum of squares of segment[..i]
    let mut prefix = Vec::with_capacity(w + 1);
    prefix.push(0.0);
    for x in segment {
        prefix.push(prefix.last().unwrap() + x * x);
    }

    let nccf: Vec<f64> = (0..=max_lag + 1)
        .map(|lag| {
            if lag >= w {
                return 0.0;
            }
            let head = prefix[w - lag];
            let tail = prefix[w] - prefix[lag];
            let denom = (head * tail).sqrt();
            if denom < 1e-20 {
                0.0
            } else {
                buf[lag].re / n / denom
            }
        })
        .collect();

    let best = (min_lag..=max_lag).map(|l| nccf[l]).fold(f64::MIN, f64::max);
    if best < config.voicing_threshold {
        return 0.0;
    }
    let lag = (min_lag..=max_lag)
        .find(|&l| {
            let r = nccf[l];
            r >= config.octave_tolerance * best && r >= nccf[l - 1] && r >= nccf[l + 1]
        })
        .unwrap_or(min_lag);

    let (a, b, c) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let offset = if curvature.abs() > 1e-12 { (0.5 * (a - c) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    let f0 = rate / (lag as f64 + offset);
    f0.clamp(config.min_f0, config.max_f0)
}

fn median_filter_voiced(raw: &[f64]) -> Vec<f64> {
    (0..raw.len())
        .map(|i| {
            if i == 0 || i + 1 >= raw.len() || raw[i] == 0.0 || raw[i - 1] == 0.0 || raw[i + 1] == 0.0 {
                return raw[i];
            }
            let mut w = [raw[i - 1], raw[i], raw[i + 1]];
            w.sort_by(|a, b| a.total_cmp(b));
            w[1]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn sawtooth_200hz() {
        let clip = synth::sawtooth(200.0, 0.5, 1.0, 16000);
        let track = estimate_f0(&clip, 0.005);
        assert!(track.voiced_fraction() > 0.9);
        let med = median_voiced_f0(&track).unwrap();
        assert!((med - 200.0).abs() <= 2.0, "median {med}");
    }

    #[test]
    fn vowels_across_range() {
        for f0 in [80.0, 150.0, 220.0, 310.0, 450.0] {
            let clip = synth::vowel(f0, &synth::VOWEL_A, 0.6, 16000);
            let med = median_voiced_f0(&estimate_f0(&clip, 0.005)).unwrap();
            assert!((med / f0 - 1.0).abs() < 0.02, "f0 {f0} -> {med}");
        }
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let clip = synth::white_noise(0.3, 1.0, 16000, 5);
        let track = estimate_f0(&clip, 0.005);
        assert!(track.voiced_fraction() <= 0.1, "voiced {}", track.voiced_fraction());
    }

    #[test]
    fn silence_is_unvoiced() {
        let clip = AudioClip::new("s", vec![0.0; 16000], 16000);
        let track = estimate_f0(&clip, 0.005);
        assert!(!track.is_empty());
        assert!(track.f0.iter().all(|&f| f == 0.0));
        assert!(track.voicing.iter().all(|&v| !v));
    }

    #[test]
    fn scale_invariant() {
        let clip = synth::vowel(230.0, &synth::VOWEL_A, 0.5, 16000);
        let half = clip.with_samples(clip.samples.iter().map(|s| s * 0.5).collect());
        let a = estimate_f0(&clip, 0.005);
        let b = estimate_f0(&half, 0.005);
        for (x, y) in a.f0.iter().zip(&b.f0) {
            assert!((x - y).abs() <= 1.0);
        }
    }

    #[test]
    fn voiced_frames_in_search_range() {
        let clip = synth::cvcv_word(260.0, 1.0, 16000, 3);
        let track = estimate_f0(&clip, 0.005);
        for (&f, &v) in track.f0.iter().zip(&track.voicing) {
            assert_eq!(v, f > 0.0);
            if v {
                assert!((50.0..=600.0).contains(&f));
            }
        }
    }
}

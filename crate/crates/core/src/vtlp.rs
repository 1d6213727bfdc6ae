//! Vocal tract length perturbation.
//!
//! The smoothed spectral envelope of every STFT frame is re-read at warped
//! frequencies (`new_env(f) = old_env(g(f))`, with `g(f) = αf` below the
//! bend), while the excitation residual and the phase are kept. Formants move
//! by `1/α`; F0 and duration do not change.

use rand::Rng;

use crate::audio_io::AudioClip;
use crate::seed;
use crate::spectral::{istft, spectral_envelope, stft, Complex64, SpectralError};

pub const FFT_SIZE: usize = 1024;
pub const HOP: usize = FFT_SIZE / 4;

/// Warp factors drawn by [`sample_alpha`]: 0.90, 0.92, …, 1.10.
pub const ALPHA_GRID: [f64; 11] = [0.90, 0.92, 0.94, 0.96, 0.98, 1.00, 1.02, 1.04, 1.06, 1.08, 1.10];
pub const ALPHA_RANGE: (f64, f64) = (0.9, 1.1);
pub const DEFAULT_BOUNDARY_FRACTION: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum VtlpError {
    #[error("warp factor {0} outside [0.9, 1.1]")]
    AlphaOutOfRange(f64),
    #[error("boundary fraction {0} outside (0, 1)")]
    BoundaryOutOfRange(f64),
    #[error("frequency {freq} Hz outside [0, {nyquist}]")]
    FrequencyOutOfRange { freq: f64, nyquist: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub alpha: f64,
    pub boundary_fraction: f64,
}

impl WarpSpec {
    pub fn new(alpha: f64) -> Result<Self, VtlpError> {
        Self::with_boundary(alpha, DEFAULT_BOUNDARY_FRACTION)
    }

    pub fn with_boundary(alpha: f64, boundary_fraction: f64) -> Result<Self, VtlpError> {
        // Small slack so grid values like 0.9 built from arithmetic still pass.
        if !(ALPHA_RANGE.0 - 1e-9..=ALPHA_RANGE.1 + 1e-9).contains(&alpha) {
            return Err(VtlpError::AlphaOutOfRange(alpha));
        }
        if !(boundary_fraction > 0.0 && boundary_fraction < 1.0) {
            return Err(VtlpError::BoundaryOutOfRange(boundary_fraction));
        }
        Ok(Self { alpha, boundary_fraction })
    }

    /// Frequency below which the warp is the pure scaling `αf`.
    pub fn boundary_hz(&self, nyquist: f64) -> f64 {
        self.boundary_fraction * nyquist * (1.0 / self.alpha).min(1.0)
    }
}

/// Uniform draw from [`ALPHA_GRID`], deterministic in `seed`.
pub fn sample_alpha(seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    ALPHA_GRID[rng.random_range(0..ALPHA_GRID.len())]
}

/// Piecewise-linear warp: `αf` up to the boundary, then a straight segment
/// to `(nyquist, nyquist)`.
pub fn warp_frequency(freq: f64, alpha: f64, nyquist: f64, boundary_fraction: f64) -> Result<f64, VtlpError> {
    if !(0.0..=nyquist).contains(&freq) {
        return Err(VtlpError::FrequencyOutOfRange { freq, nyquist });
    }
    let spec = WarpSpec::with_boundary(alpha, boundary_fraction)?;
    Ok(warp_unchecked(freq, &spec, nyquist))
}

fn warp_unchecked(freq: f64, spec: &WarpSpec, nyquist: f64) -> f64 {
    let fb = spec.boundary_hz(nyquist);
    if freq <= fb {
        spec.alpha * freq
    } else {
        let low = spec.alpha * fb;
        low + (nyquist - low) / (nyquist - fb) * (freq - fb)
    }
}

pub fn apply_vtlp(clip: &AudioClip, spec: &WarpSpec) -> Result<AudioClip, VtlpError> {
    let mut analysis = stft(clip, FFT_SIZE, HOP)?;
    let nyquist = f64::from(clip.sample_rate) / 2.0;
    let bin_hz = analysis.bin_hz();
    let bins = analysis.bins();
    // Fractional source bin for every output bin.
    let source_bins: Vec<f64> =
        (0..bins).map(|k| (warp_unchecked(k as f64 * bin_hz, spec, nyquist) / bin_hz).min((bins - 1) as f64)).collect();

    for frame in &mut analysis.frames {
        let magnitudes: Vec<f64> = frame.iter().map(|c| c.norm()).collect();
        let envelope = spectral_envelope(&magnitudes);
        for (k, c) in frame.iter_mut().enumerate() {
            if envelope[k] <= 0.0 {
                *c = Complex64::default();
                continue;
            }
            let warped = interpolate(&envelope, source_bins[k]);
            *c *= warped / envelope[k];
        }
    }
    Ok(clip.with_samples(istft(&analysis)))
}

fn interpolate(values: &[f64], pos: f64) -> f64 {
    let i = pos.floor() as usize;
    if i + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let t = pos - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// Suffix used for augmented file names, e.g. `_vtlp0.92`.
pub fn file_suffix(alpha: f64) -> String {
    format!("_vtlp{alpha:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn alpha_is_deterministic_and_on_grid() {
        for s in 0..200 {
            let a = sample_alpha(s);
            assert_eq!(a, sample_alpha(s));
            assert!(ALPHA_GRID.contains(&a));
            assert!((0.9..=1.1).contains(&a));
        }
    }

    #[test]
    fn alpha_draws_are_uniform() {
        // Chi-square over 10,000 draws with 10 degrees of freedom; the 99.9%
        // quantile is 29.59. Each cell must also sit within 3 sigma.
        let n = 10_000;
        let mut counts = [0usize; 11];
        for s in 0..n {
            let a = sample_alpha(seed::splitmix64(s));
            counts[ALPHA_GRID.iter().position(|&g| g == a).unwrap()] += 1;
        }
        let expected = n as f64 / 11.0;
        let sigma = (n as f64 * (1.0 / 11.0) * (10.0 / 11.0)).sqrt();
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 29.59, "chi2 {chi2}, counts {counts:?}");
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn warp_rules() {
        for f in [0.0, 100.0, 3999.0, 7000.0, 8000.0] {
            assert_eq!(warp_frequency(f, 1.0, 8000.0, 0.8).unwrap(), f);
        }
        for alpha in ALPHA_GRID {
            assert_eq!(warp_frequency(0.0, alpha, 8000.0, 0.8).unwrap(), 0.0);
            assert!((warp_frequency(8000.0, alpha, 8000.0, 0.8).unwrap() - 8000.0).abs() < 1e-9);
        }
        assert!((warp_frequency(1000.0, 0.9, 8000.0, 0.8).unwrap() - 900.0).abs() < 1e-9);
        assert!(matches!(warp_frequency(8001.0, 1.0, 8000.0, 0.8), Err(VtlpError::FrequencyOutOfRange { .. })));
        assert!(matches!(warp_frequency(-1.0, 1.0, 8000.0, 0.8), Err(VtlpError::FrequencyOutOfRange { .. })));
        assert!(matches!(WarpSpec::new(1.2), Err(VtlpError::AlphaOutOfRange(_))));
        assert!(matches!(WarpSpec::with_boundary(1.0, 1.0), Err(VtlpError::BoundaryOutOfRange(_))));
    }

    #[test]
    fn warp_is_continuous_and_increasing() {
        for alpha in [0.9, 0.95, 1.0, 1.05, 1.1] {
            let spec = WarpSpec::new(alpha).unwrap();
            let fb = spec.boundary_hz(8000.0);
            let below = warp_unchecked(fb - 1e-9, &spec, 8000.0);
            let above = warp_unchecked(fb + 1e-9, &spec, 8000.0);
            assert!((below - above).abs() < 1e-6);
            let mut prev = -1.0;
            for i in 0..=800 {
                let g = warp_unchecked(i as f64 * 10.0, &spec, 8000.0);
                assert!(g > prev);
                prev = g;
            }
        }
    }

    #[test]
    fn identity_warp_reconstructs() {
        let clip = synth::cvcv_word(200.0, 1.0, 16000, 4);
        let out = apply_vtlp(&clip, &WarpSpec::new(1.0).unwrap()).unwrap();
        assert_eq!(out.len(), clip.len());
        let rms = (clip.samples.iter().zip(&out.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / clip.len() as f64)
            .sqrt();
        assert!(rms <= 1e-4, "rms {rms}");
    }

    #[test]
    fn formant_moves_by_inverse_alpha() {
        let clip = synth::vowel(200.0, &[synth::Formant::new(1000.0, 150.0)], 1.0, 16000);
        let bin_hz = 16000.0 / FFT_SIZE as f64;
        for alpha in [0.9, 1.1] {
            let out = apply_vtlp(&clip, &WarpSpec::new(alpha).unwrap()).unwrap();
            let expected = 1000.0 / alpha / bin_hz;
            let got = crate::spectral::peak_bin(&crate::spectral::average_envelope(&out, FFT_SIZE, HOP).unwrap());
            assert!((got - expected).abs() <= 2.0, "alpha {alpha}: peak bin {got}, expected {expected}");
        }
    }

    #[test]
    fn too_short_clip_errors() {
        let clip = AudioClip::new("s", vec![0.1; 500], 16000);
        assert!(matches!(
            apply_vtlp(&clip, &WarpSpec::new(0.9).unwrap()),
            Err(VtlpError::Spectral(SpectralError::TooShort { .. }))
        ));
    }
}

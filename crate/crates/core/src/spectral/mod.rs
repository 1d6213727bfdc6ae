//! Shared analysis/synthesis kernel.
//!
//! STFT/ISTFT, cepstrally smoothed spectral envelopes, autocorrelation F0
//! tracking, mel-cepstral features with a pulse/noise source-filter
//! resynthesis, and the MCP1 feature interchange file.

mod envelope;
mod f0;
mod features;
mod mcp1;
mod stft;

pub use envelope::{average_envelope, peak_bin, spectral_envelope, ENVELOPE_LIFTER, LOG_FLOOR};
pub use f0::{estimate_f0, estimate_f0_with, median_voiced_f0, F0Config, PitchTrack};
pub use features::{
    extract_features, frame_grid, synthesize_from_features, FeatureConfig, FeatureMatrix,
};
pub use mcp1::{decode_features, encode_features, read_features, write_features, FeatureFileError, MCP1_MAGIC};
pub use stft::{istft, stft, stft_with, Padding, Spectrogram};

pub use rustfft::num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("fft size {0} is not a power of two")]
    FftSizeNotPowerOfTwo(usize),
    #[error("hop {hop} must be in 1..={fft_size}")]
    InvalidHop { hop: usize, fft_size: usize },
    #[error("signal of {len} samples is shorter than one {needed}-sample frame")]
    TooShort { len: usize, needed: usize },
    #[error("expected a {expected} Hz clip, got {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },
    #[error("feature/pitch frame counts differ by more than one ({features} vs {pitch})")]
    FrameCountMismatch { features: usize, pitch: usize },
    #[error("non-finite value in feature frame {0}")]
    NonFinite(usize),
}

/// Periodic Hann window (sums to a constant at hop = len/4 and len/2).
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) { 0.5 * (values[mid - 1] + values[mid]) } else { values[mid] })
}

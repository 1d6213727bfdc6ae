//! Speech data augmentation for low-resource (pathological) speech recognition.
//!
//! Every augmenter is a pure function from an [`AudioClip`] (plus parameters)
//! to a new clip, so batch runs are reproducible and trivially parallel:
//!
//! - [`vtlp`]: vocal tract length perturbation by spectral-envelope warping.
//! - [`reverb`]: image-source room impulse responses and convolution.
//! - [`pitch`]: TD-PSOLA pitch modification with duration preserved.
//! - [`rate`]: DTW-driven speaking-rate matching with WSOLA resynthesis.
//! - [`spectral`]: STFT, F0 estimation, mel-cepstral features and the MCP1
//!   feature interchange file used by external feature-mapping models.
//!
//! [`manifest`], [`eval`] and [`pipeline`] cover dataset bookkeeping, phone
//! error rate scoring and the dataset-doubling batch driver.

pub mod audio_io;
pub mod eval;
pub mod manifest;
pub mod pipeline;
pub mod pitch;
pub mod rate;
pub mod reverb;
pub mod seed;
pub mod spectral;
pub mod synth;
pub mod vtlp;

pub use audio_io::{AudioClip, AudioError, CANONICAL_RATE};

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] audio_io::AudioError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    FeatureFile(#[from] spectral::FeatureFileError),
    #[error(transparent)]
    Vtlp(#[from] vtlp::VtlpError),
    #[error(transparent)]
    Reverb(#[from] reverb::ReverbError),
    #[error(transparent)]
    Pitch(#[from] pitch::PitchError),
    #[error(transparent)]
    Rate(#[from] rate::RateError),
    #[error(transparent)]
    Manifest(#[from] manifest::ManifestError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! C ABI over `speech-augment`.
//!
//! Clips cross the boundary as opaque [`SaClip`] handles. Every fallible
//! function returns an [`SaStatus`]; on failure a message for the calling
//! thread is available from [`sa_last_error_message`]. Output handles are
//! written only on success and must be released with [`sa_clip_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use speech_augment::audio_io::{load_wav, resample, save_wav};
use speech_augment::eval::{align, per, PhoneSequence};
use speech_augment::pipeline::{augment_clip, Augmentation};
use speech_augment::pitch::PitchModSpec;
use speech_augment::reverb::{default_room, generate_rir, RoomSpec, DEFAULT_SPEED_OF_SOUND};
use speech_augment::spectral::{extract_features, read_features, synthesize_from_features, write_features};
use speech_augment::vtlp::WarpSpec;
use speech_augment::{AudioClip, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Panic = 3,
    Audio = 10,
    Spectral = 11,
    FeatureFile = 12,
    Vtlp = 13,
    Reverb = 14,
    Pitch = 15,
    Rate = 16,
    Eval = 17,
    Other = 99,
}

/// Opaque mono audio clip.
pub struct SaClip {
    inner: AudioClip,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SaStatus {
    match e {
        Error::Audio(_) => SaStatus::Audio,
        Error::Spectral(_) => SaStatus::Spectral,
        Error::FeatureFile(_) => SaStatus::FeatureFile,
        Error::Vtlp(_) => SaStatus::Vtlp,
        Error::Reverb(_) => SaStatus::Reverb,
        Error::Pitch(_) => SaStatus::Pitch,
        Error::Rate(_) => SaStatus::Rate,
        Error::Eval(_) => SaStatus::Eval,
        _ => SaStatus::Other,
    }
}

struct Failure(SaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

macro_rules! lib_err {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

lib_err!(
    speech_augment::AudioError,
    speech_augment::spectral::SpectralError,
    speech_augment::spectral::FeatureFileError,
    speech_augment::vtlp::VtlpError,
    speech_augment::reverb::ReverbError,
    speech_augment::pitch::PitchError,
    speech_augment::eval::EvalError
);

fn null(what: &str) -> Failure {
    Failure(SaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            SaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(SaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn clip_arg<'a>(p: *const SaClip) -> Result<&'a AudioClip, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null("clip"))
}

unsafe fn triple(p: *const f64, what: &str) -> Result<[f64; 3], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

unsafe fn emit(out: *mut *mut SaClip, clip: AudioClip) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(SaClip { inner: clip }));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` samples into a new clip.
///
/// # Safety
/// `samples` must point to `len` readable doubles (it may be null when `len`
/// is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_new(samples: *const f64, len: usize, sample_rate: u32, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        if samples.is_null() && len > 0 {
            return Err(null("samples"));
        }
        if sample_rate == 0 {
            return Err(speech_augment::AudioError::InvalidRate(0).into());
        }
        let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(samples, len).to_vec() };
        emit(out, AudioClip::new("ffi", data, sample_rate))
    })
}

/// Reads a WAV file, downmixed to mono at its native rate.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_load(path: *const c_char, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        let clip = load_wav(str_arg(path, "path")?)?;
        emit(out, clip)
    })
}

/// Writes the clip as 16-bit PCM. `clipped` (may be null) receives the number
/// of samples that had to be clamped to full scale.
///
/// # Safety
/// `clip` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_save(clip: *const SaClip, path: *const c_char, clipped: *mut usize) -> SaStatus {
    guard(|| {
        let n = save_wav(clip_arg(clip)?, str_arg(path, "path")?)?;
        if !clipped.is_null() {
            *clipped = n;
        }
        Ok(())
    })
}

/// # Safety
/// `clip` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_free(clip: *mut SaClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_len(clip: *const SaClip) -> usize {
    clip.as_ref().map_or(0, |c| c.inner.len())
}

/// Sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_sample_rate(clip: *const SaClip) -> u32 {
    clip.as_ref().map_or(0, |c| c.inner.sample_rate)
}

/// Borrowed view of the samples, valid until the clip is freed.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sa_clip_samples(clip: *const SaClip) -> *const f64 {
    clip.as_ref().map_or(ptr::null(), |c| c.inner.samples.as_ptr())
}

/// # Safety
/// `clip` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_resample(clip: *const SaClip, target_rate: u32, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        let resampled = resample(clip_arg(clip)?, target_rate)?;
        emit(out, resampled)
    })
}

unsafe fn augment(clip: *const SaClip, aug: impl FnOnce() -> Result<Augmentation, Failure>, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        let input = clip_arg(clip)?;
        let result = augment_clip(input, &aug()?)?;
        emit(out, result)
    })
}

/// Vocal tract length perturbation with warp factor `alpha` in [0.9, 1.1].
///
/// # Safety
/// `clip` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_vtlp(clip: *const SaClip, alpha: f64, out: *mut *mut SaClip) -> SaStatus {
    augment(clip, || Ok(Augmentation::Vtlp(WarpSpec::new(alpha)?)), out)
}

/// Pitch scaling by `beta` in [0.5, 2.0] with duration preserved.
///
/// # Safety
/// `clip` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_pitch(clip: *const SaClip, beta: f64, out: *mut *mut SaClip) -> SaStatus {
    augment(clip, || Ok(Augmentation::Pitch(PitchModSpec::new(beta)?)), out)
}

/// Constant speaking-rate change; the output lasts `factor` times as long.
///
/// # Safety
/// `clip` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_rate(clip: *const SaClip, factor: f64, out: *mut *mut SaClip) -> SaStatus {
    augment(clip, || Ok(Augmentation::RateFactor(factor)), out)
}

/// Time-warps `clip` to follow the speaking rate of `target`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_match_rate(clip: *const SaClip, target: *const SaClip, out: *mut *mut SaClip) -> SaStatus {
    augment(clip, || Ok(Augmentation::RateMatch(clip_arg(target)?.clone())), out)
}

/// Convolves with an impulse response clip (same sample rate), keeping the tail.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_reverb(clip: *const SaClip, rir: *const SaClip, out: *mut *mut SaClip) -> SaStatus {
    augment(clip, || Ok(Augmentation::Reverb(speech_augment::reverb::ImpulseResponse::from_clip(clip_arg(rir)?))), out)
}

/// Impulse response of the default room with seeded source/microphone jitter.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_rir_default(seed: u64, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        let h = generate_rir(&default_room(seed))?;
        emit(out, h.to_clip("rir"))
    })
}

/// Shoebox-room impulse response. `dimensions`, `source` and `mic` point to
/// three doubles (metres); `reflection` to six wall coefficients ordered
/// x=0, x=Lx, y=0, y=Ly, z=0, z=Lz. Speed of sound is 343 m/s.
///
/// # Safety
/// Array pointers must reference the stated number of doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sa_rir(
    dimensions: *const f64,
    source: *const f64,
    mic: *const f64,
    reflection: *const f64,
    max_order: u32,
    sample_rate: u32,
    out: *mut *mut SaClip,
) -> SaStatus {
    guard(|| {
        if reflection.is_null() {
            return Err(null("reflection"));
        }
        let mut reflection_coeffs = [0.0; 6];
        reflection_coeffs.copy_from_slice(std::slice::from_raw_parts(reflection, 6));
        let room = RoomSpec {
            dimensions: triple(dimensions, "dimensions")?,
            source: triple(source, "source")?,
            mic: triple(mic, "mic")?,
            reflection_coeffs,
            max_order,
            sample_rate,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        };
        emit(out, generate_rir(&room)?.to_clip("rir"))
    })
}

/// Phone error rate (percent) of a space-separated hypothesis against a
/// space-separated reference.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_phone_error_rate(reference: *const c_char, hypothesis: *const c_char, out: *mut f64) -> SaStatus {
    guard(|| {
        let r = PhoneSequence::parse(str_arg(reference, "reference")?);
        let h = PhoneSequence::parse(str_arg(hypothesis, "hypothesis")?);
        let value = per(&align(&r, &h))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = value;
        Ok(())
    })
}

/// Extracts mel-cepstra and F0 from a 16 kHz clip into an MCP1 file.
///
/// # Safety
/// `clip` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sa_features_extract(clip: *const SaClip, path: *const c_char) -> SaStatus {
    guard(|| {
        let (features, pitch) = extract_features(clip_arg(clip)?)?;
        write_features(str_arg(path, "path")?, &features, &pitch)?;
        Ok(())
    })
}

/// Resynthesizes a waveform from an MCP1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_features_synthesize(path: *const c_char, out: *mut *mut SaClip) -> SaStatus {
    guard(|| {
        let (features, pitch) = read_features(str_arg(path, "path")?)?;
        emit(out, synthesize_from_features(&features, &pitch)?)
    })
}

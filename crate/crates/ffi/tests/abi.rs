use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use speech_augment_ffi::*;

fn last_error() -> String {
    let p = sa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tone(freq: f64, secs: f64) -> *mut SaClip {
    let n = (secs * 16000.0) as usize;
    // Harmonic-rich buzz so the F0 tracker sees voicing.
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / 16000.0;
            (1..=10).map(|k| (2.0 * std::f64::consts::PI * freq * k as f64 * t).sin() / k as f64).sum::<f64>() * 0.2
        })
        .collect();
    let mut clip = ptr::null_mut();
    assert_eq!(unsafe { sa_clip_new(samples.as_ptr(), samples.len(), 16000, &mut clip) }, SaStatus::Ok);
    clip
}

fn samples(clip: *const SaClip) -> &'static [f64] {
    unsafe { std::slice::from_raw_parts(sa_clip_samples(clip), sa_clip_len(clip)) }
}

#[test]
fn clip_round_trip_through_wav() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.wav").to_str().unwrap()).unwrap();
    let clip = tone(200.0, 0.25);
    let mut clipped = usize::MAX;
    unsafe {
        assert_eq!(sa_clip_save(clip, path.as_ptr(), &mut clipped), SaStatus::Ok);
        assert_eq!(clipped, 0);
        let mut back = ptr::null_mut();
        assert_eq!(sa_clip_load(path.as_ptr(), &mut back), SaStatus::Ok);
        assert_eq!(sa_clip_len(back), 4000);
        assert_eq!(sa_clip_sample_rate(back), 16000);
        let err = samples(clip).iter().zip(samples(back)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1.0 / 32768.0 + 1e-12, "{err}");
        sa_clip_free(back);
        sa_clip_free(clip);
    }
}

#[test]
fn augmenters_preserve_or_scale_length() {
    let clip = tone(200.0, 0.5);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(sa_vtlp(clip, 0.9, &mut out), SaStatus::Ok);
        assert_eq!(sa_clip_len(out), 8000);
        sa_clip_free(out);

        assert_eq!(sa_pitch(clip, 1.3, &mut out), SaStatus::Ok);
        assert!((sa_clip_len(out) as i64 - 8000).abs() <= 80);
        sa_clip_free(out);

        assert_eq!(sa_rate(clip, 1.25, &mut out), SaStatus::Ok);
        assert!((sa_clip_len(out) as f64 / 10000.0 - 1.0).abs() <= 0.02);
        sa_clip_free(out);

        assert_eq!(sa_match_rate(clip, clip, &mut out), SaStatus::Ok);
        assert!((sa_clip_len(out) as f64 / 8000.0 - 1.0).abs() <= 0.02);
        sa_clip_free(out);

        let mut rir = ptr::null_mut();
        assert_eq!(sa_rir_default(7, &mut rir), SaStatus::Ok);
        assert_eq!(sa_reverb(clip, rir, &mut out), SaStatus::Ok);
        assert_eq!(sa_clip_len(out), 8000 + sa_clip_len(rir) - 1);
        sa_clip_free(out);
        sa_clip_free(rir);

        assert_eq!(sa_resample(clip, 8000, &mut out), SaStatus::Ok);
        assert_eq!(sa_clip_sample_rate(out), 8000);
        assert_eq!(sa_clip_len(out), 4000);
        sa_clip_free(out);
        sa_clip_free(clip);
    }
}

#[test]
fn parameter_errors_set_status_and_message() {
    let clip = tone(200.0, 0.2);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(sa_vtlp(clip, 1.5, &mut out), SaStatus::Vtlp);
        assert!(out.is_null());
        assert!(last_error().contains("1.5"), "{}", last_error());
        assert_eq!(sa_pitch(clip, 3.0, &mut out), SaStatus::Pitch);
        assert_eq!(sa_rate(clip, 10.0, &mut out), SaStatus::Rate);
        assert_eq!(sa_vtlp(ptr::null(), 1.0, &mut out), SaStatus::NullPointer);
        assert_eq!(sa_vtlp(clip, 1.0, ptr::null_mut()), SaStatus::NullPointer);
        let missing = CString::new("/nonexistent/x.wav").unwrap();
        assert_eq!(sa_clip_load(missing.as_ptr(), &mut out), SaStatus::Audio);
        assert_eq!(sa_clip_new(ptr::null(), 5, 16000, &mut out), SaStatus::NullPointer);
        assert_eq!(sa_clip_new(ptr::null(), 0, 0, &mut out), SaStatus::Audio);
        let bad = [0xffu8, 0];
        assert_eq!(sa_clip_load(bad.as_ptr().cast(), &mut out), SaStatus::InvalidUtf8);
        sa_clip_free(clip);
        sa_clip_free(ptr::null_mut());
        assert_eq!(sa_clip_len(ptr::null()), 0);
    }
}

#[test]
fn custom_room_impulse_response() {
    let dims = [4.0, 5.0, 3.0];
    let source = [1.0, 1.0, 1.5];
    let mic = [3.0, 4.0, 1.5];
    let absorbing = [0.0; 6];
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            sa_rir(dims.as_ptr(), source.as_ptr(), mic.as_ptr(), absorbing.as_ptr(), 3, 16000, &mut out),
            SaStatus::Ok
        );
        let h = samples(out);
        let d = (2.0f64 * 2.0 + 3.0 * 3.0).sqrt();
        let peak = h.iter().enumerate().fold((0, 0.0f64), |m, (i, &v)| if v.abs() > m.1 { (i, v.abs()) } else { m });
        assert!((peak.0 as f64 - d / 343.0 * 16000.0).abs() <= 1.0);
        sa_clip_free(out);

        let outside = [5.0, 1.0, 1.0];
        assert_eq!(
            sa_rir(dims.as_ptr(), outside.as_ptr(), mic.as_ptr(), absorbing.as_ptr(), 3, 16000, &mut out),
            SaStatus::Reverb
        );
        assert_eq!(
            sa_rir(dims.as_ptr(), source.as_ptr(), mic.as_ptr(), ptr::null(), 3, 16000, &mut out),
            SaStatus::NullPointer
        );
    }
}

#[test]
fn phone_error_rate() {
    let r = CString::new("a b c d e f g h i j").unwrap();
    let h = CString::new("a x c y e f h i j k").unwrap();
    let empty = CString::new("").unwrap();
    let mut value = -1.0;
    unsafe {
        assert_eq!(sa_phone_error_rate(r.as_ptr(), h.as_ptr(), &mut value), SaStatus::Ok);
        assert!((value - 40.0).abs() < 1e-12);
        assert_eq!(sa_phone_error_rate(empty.as_ptr(), h.as_ptr(), &mut value), SaStatus::Eval);
    }
}

#[test]
fn features_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.mcp1").to_str().unwrap()).unwrap();
    let clip = tone(150.0, 0.5);
    unsafe {
        assert_eq!(sa_features_extract(clip, path.as_ptr()), SaStatus::Ok);
        let bytes = std::fs::read(dir.path().join("f.mcp1")).unwrap();
        assert_eq!(&bytes[..4], b"MCP1");
        let mut out = ptr::null_mut();
        assert_eq!(sa_features_synthesize(path.as_ptr(), &mut out), SaStatus::Ok);
        // One 5 ms hop per 25 ms analysis frame: (8000 - 400) / 80 + 1 frames.
        assert_eq!(sa_clip_len(out), 96 * 80);
        assert_eq!(sa_clip_sample_rate(out), 16000);
        sa_clip_free(out);
        sa_clip_free(clip);
    }
}

#[test]
fn version_and_errors_are_thread_local() {
    let v = unsafe { CStr::from_ptr(sa_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let mut out = ptr::null_mut();
    unsafe { sa_vtlp(ptr::null(), 1.0, &mut out) };
    let here = last_error();
    std::thread::spawn(|| assert!(sa_last_error_message().is_null())).join().unwrap();
    assert_eq!(here, last_error());
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/speech_augment.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["sa_clip_new", "sa_vtlp", "sa_pitch", "sa_rate", "sa_rir", "sa_phone_error_rate", "SA_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available; skipping syntax check");
        return;
    };
    assert!(status.success());
}

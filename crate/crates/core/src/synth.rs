//! Deterministic synthetic test signals: tones, vowels and CVCV-like words.
//!
//! These stand in for corpus audio in the test suites and the CLI demo.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::audio_io::AudioClip;
use crate::seed;

/// A formant resonance: centre frequency and bandwidth in Hz.
#[derive(Debug, Clone, Copy)]
pub struct Formant {
    pub freq: f64,
    pub bandwidth: f64,
}

impl Formant {
    pub const fn new(freq: f64, bandwidth: f64) -> Self {
        Self { freq, bandwidth }
    }
}

/// Typical /a/-like formants.
pub const VOWEL_A: [Formant; 3] =
    [Formant::new(700.0, 110.0), Formant::new(1220.0, 120.0), Formant::new(2600.0, 160.0)];

pub fn sine(freq: f64, amp: f64, secs: f64, rate: u32) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let samples = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()).collect();
    AudioClip::new(format!("sine{freq}"), samples, rate)
}

/// Naive sawtooth in [-amp, amp].
pub fn sawtooth(f0: f64, amp: f64, secs: f64, rate: u32) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let phase = (f0 * i as f64 / f64::from(rate)).fract();
            amp * (2.0 * phase - 1.0)
        })
        .collect();
    AudioClip::new(format!("saw{f0}"), samples, rate)
}

pub fn white_noise(amp: f64, secs: f64, rate: u32, seed: u64) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let mut rng = seed::rng(seed);
    let samples = (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
    AudioClip::new("noise", samples, rate)
}

/// Impulse train at `f0` filtered by a cascade of two-pole resonators,
/// peak-normalized to 0.5.
pub fn vowel(f0: f64, formants: &[Formant], secs: f64, rate: u32) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let period = f64::from(rate) / f0;
    let mut excitation = vec![0.0; n];
    let mut t = 0.0f64;
    loop {
        let idx = t.round() as usize;
        if idx >= n {
            break;
        }
        excitation[idx] = 1.0;
        t += period;
    }
    let mut signal = excitation;
    for f in formants {
        signal = resonate(&signal, f, rate);
    }
    normalize_peak(&mut signal, 0.5);
    AudioClip::new(format!("vowel{f0}"), signal, rate)
}

fn resonate(x: &[f64], formant: &Formant, rate: u32) -> Vec<f64> {
    let fs = f64::from(rate);
    let r = (-PI * formant.bandwidth / fs).exp();
    let theta = 2.0 * PI * formant.freq / fs;
    let a1 = 2.0 * r * theta.cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = v + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

fn normalize_peak(x: &mut [f64], target: f64) {
    let peak = x.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|s| *s *= target / peak);
    }
}

/// CVCV word shaped like /sasa/: fricative noise, vowel, fricative, vowel,
/// with short silences. `stretch` scales every segment duration.
pub fn cvcv_word(f0: f64, stretch: f64, rate: u32, seed: u64) -> AudioClip {
    let fs = f64::from(rate);
    let len = |secs: f64| (secs * stretch * fs).round() as usize;
    let mut rng = seed::rng(seed);
    let mut out = Vec::new();
    let mut fricative = |out: &mut Vec<f64>, secs: f64| {
        let n = len(secs);
        let mut prev = 0.0;
        for i in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            let hp = w - prev; // first difference tilts the noise upward
            prev = w;
            let ramp = (i.min(n - 1 - i) as f64 / (0.01 * fs)).min(1.0);
            out.push(0.08 * hp * ramp);
        }
    };
    let voiced = |out: &mut Vec<f64>, secs: f64| {
        let v = vowel(f0, &VOWEL_A, secs * stretch, rate);
        let n = v.len();
        out.extend(v.samples.iter().enumerate().map(|(i, s)| {
            let ramp = (i.min(n - 1 - i) as f64 / (0.015 * fs)).min(1.0);
            s * ramp
        }));
    };
    out.extend(std::iter::repeat_n(0.0, len(0.05)));
    fricative(&mut out, 0.12);
    voiced(&mut out, 0.22);
    out.extend(std::iter::repeat_n(0.0, len(0.03)));
    fricative(&mut out, 0.12);
    voiced(&mut out, 0.26);
    out.extend(std::iter::repeat_n(0.0, len(0.05)));
    AudioClip::new("cvcv", out, rate)
}

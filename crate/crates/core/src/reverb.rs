//! Room reverberation by the image-source method.
//!
//! A shoebox room is mirrored along each axis; image `(i, j, k)` has made
//! `|i| + |j| + |k|` wall reflections. Each image contributes
//! `Π β / (4π d)` at delay `d / c`, rendered with a 16-tap windowed-sinc
//! fractional delay. The input is then convolved with the impulse response.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio_io::{sinc, AudioClip, CANONICAL_RATE};
use crate::seed;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
/// Fractional-delay kernel taps (`FRACTIONAL_TAPS / 2` on each side).
pub const FRACTIONAL_TAPS: usize = 16;
const HALF_TAPS: i64 = (FRACTIONAL_TAPS / 2) as i64;

#[derive(Debug, thiserror::Error)]
pub enum ReverbError {
    #[error("room dimension {axis} = {value} m must be positive")]
    Dimension { axis: char, value: f64 },
    #[error("{what} {axis} = {value} m is not strictly inside the room (0, {limit})")]
    OutsideRoom { what: &'static str, axis: char, value: f64, limit: f64 },
    #[error("reflection coefficient {index} = {value} outside [0, 1]")]
    Reflection { index: usize, value: f64 },
    #[error("invalid {what}: {value}")]
    Parameter { what: &'static str, value: f64 },
    #[error("sample rate mismatch: clip {clip} Hz, impulse response {rir} Hz")]
    RateMismatch { clip: u32, rir: u32 },
    #[error("empty signal")]
    Empty,
}

/// Walls are ordered `[x=0, x=Lx, y=0, y=Ly, z=0, z=Lz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub reflection_coeffs: [f64; 6],
    pub max_order: u32,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
}

const AXES: [char; 3] = ['x', 'y', 'z'];

impl RoomSpec {
    pub fn validate(&self) -> Result<(), ReverbError> {
        for (a, &l) in self.dimensions.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(ReverbError::Dimension { axis: AXES[a], value: l });
            }
        }
        for (what, point) in [("source", &self.source), ("mic", &self.mic)] {
            for a in 0..3 {
                let (v, l) = (point[a], self.dimensions[a]);
                if !(v > 0.0 && v < l) {
                    return Err(ReverbError::OutsideRoom { what, axis: AXES[a], value: v, limit: l });
                }
            }
        }
        for (index, &value) in self.reflection_coeffs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ReverbError::Reflection { index, value });
            }
        }
        if self.sample_rate == 0 {
            return Err(ReverbError::Parameter { what: "sample rate", value: 0.0 });
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(ReverbError::Parameter { what: "speed of sound", value: self.speed_of_sound });
        }
        Ok(())
    }

    pub fn direct_distance(&self) -> f64 {
        distance(&self.source, &self.mic)
    }

    /// Same room with source and microphone exchanged.
    pub fn swapped(&self) -> Self {
        Self { source: self.mic, mic: self.source, ..self.clone() }
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Default augmentation room: 4 × 5 × 3 m, β = 0.7 on every wall, order 10,
/// with source and microphone jittered by up to ±0.3 m per axis.
pub fn default_room(seed: u64) -> RoomSpec {
    let mut rng = seed::rng(seed);
    let mut jitter = |base: [f64; 3]| base.map(|v| v + rng.random_range(-0.3..=0.3));
    let source = jitter([1.5, 1.5, 1.5]);
    let mic = jitter([2.5, 3.5, 1.2]);
    RoomSpec {
        dimensions: [4.0, 5.0, 3.0],
        source,
        mic,
        reflection_coeffs: [0.7; 6],
        max_order: 10,
        sample_rate: CANONICAL_RATE,
        speed_of_sound: DEFAULT_SPEED_OF_SOUND,
    }
}

/// One mirror image of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub index: [i32; 3],
    pub distance: f64,
    pub delay_secs: f64,
    pub amplitude: f64,
}

/// Image coordinate and the reflection counts off the `0` and `L` walls for
/// image index `i` along one axis.
fn axis_image(i: i32, source: f64, length: f64) -> (f64, i32, i32) {
    let pos = if i % 2 == 0 { f64::from(i) * length + source } else { f64::from(i + 1) * length - source };
    let n = i.abs();
    let (near, far) = (n / 2, n - n / 2);
    // Positive indices first hit the far wall, negative ones the wall at 0.
    let (at_zero, at_length) = if i >= 0 { (near, far) } else { (far, near) };
    (pos, at_zero, at_length)
}

/// All images with `|i| + |j| + |k| <= max_order` and non-zero amplitude.
pub fn enumerate_images(room: &RoomSpec) -> Result<Vec<ImageSource>, ReverbError> {
    room.validate()?;
    let order = room.max_order as i32;
    let mut images = Vec::new();
    for i in -order..=order {
        let rest_i = order - i.abs();
        for j in -rest_i..=rest_i {
            let rest_j = rest_i - j.abs();
            for k in -rest_j..=rest_j {
                let index = [i, j, k];
                let mut gain = 1.0;
                let mut pos = [0.0; 3];
                for a in 0..3 {
                    let (p, at_zero, at_length) = axis_image(index[a], room.source[a], room.dimensions[a]);
                    pos[a] = p;
                    gain *= room.reflection_coeffs[2 * a].powi(at_zero) * room.reflection_coeffs[2 * a + 1].powi(at_length);
                }
                if gain == 0.0 {
                    continue;
                }
                let d = distance(&pos, &room.mic);
                images.push(ImageSource {
                    index,
                    distance: d,
                    delay_secs: d / room.speed_of_sound,
                    amplitude: gain / (4.0 * PI * d),
                });
            }
        }
    }
    Ok(images)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl ImpulseResponse {
    pub fn unit(delay: usize, sample_rate: u32) -> Self {
        let mut samples = vec![0.0; delay + 1];
        samples[delay] = 1.0;
        Self { samples, sample_rate }
    }

    pub fn to_clip(&self, id: &str) -> AudioClip {
        AudioClip::new(id, self.samples.clone(), self.sample_rate)
    }

    pub fn from_clip(clip: &AudioClip) -> Self {
        Self { samples: clip.samples.clone(), sample_rate: clip.sample_rate }
    }
}

/// Renders the image set into a sampled impulse response. Kernel taps before
/// `floor(direct delay) - 1` are dropped so the response stays causal with
/// respect to the direct path.
pub fn generate_rir(room: &RoomSpec) -> Result<ImpulseResponse, ReverbError> {
    let images = enumerate_images(room)?;
    let fs = f64::from(room.sample_rate);
    let max_delay = images.iter().map(|im| im.delay_secs).fold(0.0, f64::max);
    let len = (max_delay * fs).ceil() as usize + HALF_TAPS as usize + 1;
    let first = ((room.direct_distance() / room.speed_of_sound * fs).floor() as i64 - 1).max(0);
    let mut samples = vec![0.0; len];
    for im in &images {
        let tau = im.delay_secs * fs;
        let base = tau.floor() as i64;
        for n in (base - HALF_TAPS + 1)..=(base + HALF_TAPS) {
            if n < first || n as usize >= len {
                continue;
            }
            let x = n as f64 - tau;
            let window = 0.5 * (1.0 + (PI * x / HALF_TAPS as f64).cos());
            samples[n as usize] += im.amplitude * sinc(x) * window;
        }
    }
    Ok(ImpulseResponse { samples, sample_rate: room.sample_rate })
}

/// Full linear convolution by FFT overlap-add; `x.len() + h.len() - 1` samples.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let n = (2 * h.len()).next_power_of_two().max(1024);
    let block = n - h.len() + 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut kernel: Vec<Complex64> = (0..n).map(|i| Complex64::new(h.get(i).copied().unwrap_or(0.0), 0.0)).collect();
    fft.process(&mut kernel);

    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex64::default(); n];
    for start in (0..x.len()).step_by(block) {
        let chunk = &x[start..(start + block).min(x.len())];
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(chunk.get(i).copied().unwrap_or(0.0), 0.0);
        }
        fft.process(&mut buf);
        buf.iter_mut().zip(&kernel).for_each(|(b, k)| *b *= k);
        ifft.process(&mut buf);
        let valid = (chunk.len() + h.len() - 1).min(out_len - start);
        for i in 0..valid {
            out[start + i] += buf[i].re / n as f64;
        }
    }
    out
}

/// Convolves the clip with the impulse response, keeping the full tail. If the
/// result would exceed full scale it is rescaled to the input's peak.
pub fn apply_reverb(clip: &AudioClip, rir: &ImpulseResponse) -> Result<AudioClip, ReverbError> {
    if clip.sample_rate != rir.sample_rate {
        return Err(ReverbError::RateMismatch { clip: clip.sample_rate, rir: rir.sample_rate });
    }
    if clip.is_empty() || rir.samples.is_empty() {
        return Err(ReverbError::Empty);
    }
    let mut out = convolve(&clip.samples, &rir.samples);
    let peak = out.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak > 1.0 {
        let scale = clip.peak() / peak;
        out.iter_mut().for_each(|s| *s *= scale);
    }
    Ok(clip.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn room() -> RoomSpec {
        RoomSpec {
            dimensions: [4.0, 5.0, 3.0],
            source: [1.0, 1.0, 1.0],
            mic: [3.0, 4.0, 1.5],
            reflection_coeffs: [0.7; 6],
            max_order: 2,
            sample_rate: 16000,
            speed_of_sound: 343.0,
        }
    }

    #[test]
    fn order_zero_is_direct_path() {
        let r = RoomSpec { max_order: 0, ..room() };
        let images = enumerate_images(&r).unwrap();
        assert_eq!(images.len(), 1);
        let d = r.direct_distance();
        assert!((images[0].delay_secs - d / 343.0).abs() < 1e-15);
        assert!((images[0].amplitude - 1.0 / (4.0 * PI * d)).abs() < 1e-15);
    }

    #[test]
    fn integer_delay_renders_single_sample() {
        // Source and mic 343/16000 * 100 m apart along x: exactly 100 samples.
        let d = 343.0 / 16000.0 * 100.0;
        let r = RoomSpec { source: [1.0, 2.0, 1.5], mic: [1.0 + d, 2.0, 1.5], max_order: 0, ..room() };
        let ir = generate_rir(&r).unwrap();
        let peak = ir.samples.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
        assert_eq!(peak.0, 100);
        assert!((peak.1 - 1.0 / (4.0 * PI * d)).abs() < 1e-12);
        let rest: f64 = ir.samples.iter().enumerate().filter(|(i, _)| *i != 100).map(|(_, v)| v.abs()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn absorbing_walls_match_order_zero() {
        let absorbing = RoomSpec { reflection_coeffs: [0.0; 6], max_order: 5, ..room() };
        let direct = RoomSpec { max_order: 0, ..room() };
        assert_eq!(generate_rir(&absorbing).unwrap(), generate_rir(&direct).unwrap());
    }

    #[test]
    fn image_count_matches_octahedral_number() {
        // Lattice points with |i|+|j|+|k| <= n: (2n+1)(2n^2+2n+3)/3.
        for n in 0..6u32 {
            let r = RoomSpec { max_order: n, ..room() };
            let expected = (2 * n + 1) * (2 * n * n + 2 * n + 3) / 3;
            assert_eq!(enumerate_images(&r).unwrap().len(), expected as usize);
        }
    }

    #[test]
    fn causal_first_sample() {
        let r = room();
        let ir = generate_rir(&r).unwrap();
        let first = ir.samples.iter().position(|&v| v != 0.0).unwrap();
        let bound = (r.direct_distance() / 343.0 * 16000.0).floor() as usize - 1;
        assert!(first >= bound);
    }

    #[test]
    fn reciprocity() {
        let r = RoomSpec { max_order: 6, reflection_coeffs: [0.9, 0.8, 0.7, 0.6, 0.5, 0.4], ..room() };
        let a = generate_rir(&r).unwrap();
        let b = generate_rir(&r.swapped()).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_decays_in_50ms_windows() {
        let mut rng = seed::rng(3);
        for _ in 0..10 {
            let mut r = default_room(rng.random());
            r.reflection_coeffs = [rng.random_range(0.3..0.95); 6];
            let ir = generate_rir(&r).unwrap();
            let arrival = (r.direct_distance() / 343.0 * 16000.0) as usize;
            let energies: Vec<f64> = ir.samples[arrival..]
                .chunks(800)
                .map(|w| w.iter().map(|v| v * v).sum())
                .collect();
            for pair in energies[1..].windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "{energies:?}");
            }
        }
    }

    #[test]
    fn validation_errors() {
        let mut r = room();
        r.mic = [4.0, 1.0, 1.0];
        assert!(matches!(r.validate(), Err(ReverbError::OutsideRoom { what: "mic", axis: 'x', .. })));
        let mut r = room();
        r.reflection_coeffs[3] = 1.2;
        assert!(matches!(r.validate(), Err(ReverbError::Reflection { index: 3, .. })));
        let mut r = room();
        r.dimensions[2] = 0.0;
        assert!(matches!(generate_rir(&r), Err(ReverbError::Dimension { axis: 'z', .. })));
    }

    #[test]
    fn identity_and_shift_kernels() {
        let clip = crate::synth::white_noise(0.3, 0.1, 16000, 1);
        let same = apply_reverb(&clip, &ImpulseResponse::unit(0, 16000)).unwrap();
        assert_eq!(same.len(), clip.len());
        for (a, b) in clip.samples.iter().zip(&same.samples) {
            assert!((a - b).abs() < 1e-12);
        }
        let shifted = apply_reverb(&clip, &ImpulseResponse::unit(160, 16000)).unwrap();
        assert_eq!(shifted.len(), clip.len() + 160);
        assert!(shifted.samples[..160].iter().all(|v| v.abs() < 1e-12));
        for (a, b) in clip.samples.iter().zip(&shifted.samples[160..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_mismatch() {
        let clip = AudioClip::new("c", vec![0.1; 10], 16000);
        assert!(matches!(
            apply_reverb(&clip, &ImpulseResponse::unit(0, 8000)),
            Err(ReverbError::RateMismatch { .. })
        ));
    }

    #[test]
    fn overflow_is_peak_normalized() {
        let clip = AudioClip::new("c", vec![0.8; 100], 16000);
        let rir = ImpulseResponse { samples: vec![1.0, 1.0], sample_rate: 16000 };
        let out = apply_reverb(&clip, &rir).unwrap();
        assert!((out.peak() - 0.8).abs() < 1e-12);
    }
}

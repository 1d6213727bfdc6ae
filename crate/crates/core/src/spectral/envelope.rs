use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::stft::{stft_with, Padding};
use super::SpectralError;
use crate::audio_io::AudioClip;

/// Number of low-quefrency cepstral coefficients kept by the envelope lifter.
pub const ENVELOPE_LIFTER: usize = 30;

/// Magnitude floor applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-10;

/// Iterations of the envelope-lifting loop and its convergence margin (log units).
const MAX_ITERATIONS: usize = 60;
const CONVERGENCE: f64 = 0.02;

/// Cepstrally smoothed envelope of a one-sided magnitude spectrum
/// (`fft_size/2 + 1` bins), keeping the first [`ENVELOPE_LIFTER`] quefrency
/// coefficients.
///
/// The liftered log-spectrum is iteratively raised onto the spectral peaks
/// (`A <- max(log|X|, lifter(A))`) so the envelope rides on the harmonics
/// instead of averaging them with the valleys between them. An all-zero frame
/// yields an all-zero envelope.
pub fn spectral_envelope(magnitudes: &[f64]) -> Vec<f64> {
    let bins = magnitudes.len();
    if bins < 2 {
        return magnitudes.iter().map(|m| m.max(0.0)).collect();
    }
    if magnitudes.iter().all(|&m| m <= LOG_FLOOR) {
        return vec![0.0; bins];
    }
    let n = 2 * (bins - 1);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let keep = ENVELOPE_LIFTER.min(n / 2);
    let log_mag: Vec<f64> = magnitudes.iter().map(|m| m.max(LOG_FLOOR).ln()).collect();

    let mut target = log_mag.clone();
    let mut smooth = vec![0.0; bins];
    let mut buf = vec![Complex64::default(); n];
    for _ in 0..MAX_ITERATIONS {
        lifter(&target, keep, fft.as_ref(), &mut buf, &mut smooth);
        let mut worst = 0.0f64;
        for k in 0..bins {
            let excess = log_mag[k] - smooth[k];
            worst = worst.max(excess);
            target[k] = log_mag[k].max(smooth[k]);
        }
        if worst < CONVERGENCE {
            break;
        }
    }
    smooth.iter().map(|v| v.exp()).collect()
}

/// Envelope averaged over all unpadded frames of a clip.
pub fn average_envelope(clip: &AudioClip, fft_size: usize, hop: usize) -> Result<Vec<f64>, SpectralError> {
    let spec = stft_with(clip, fft_size, hop, Padding::None)?;
    let mut avg = vec![0.0; spec.bins()];
    for frame in &spec.frames {
        let mags: Vec<f64> = frame.iter().map(|c| c.norm()).collect();
        for (a, e) in avg.iter_mut().zip(spectral_envelope(&mags)) {
            *a += e;
        }
    }
    let n = spec.frames.len().max(1) as f64;
    avg.iter_mut().for_each(|a| *a /= n);
    Ok(avg)
}

/// Fractional bin of the largest interior maximum, refined by a parabola
/// through the log values around it.
pub fn peak_bin(envelope: &[f64]) -> f64 {
    if envelope.len() < 3 {
        return 0.0;
    }
    let k = (1..envelope.len() - 1).max_by(|&a, &b| envelope[a].total_cmp(&envelope[b])).unwrap();
    let ln = |v: f64| v.max(LOG_FLOOR).ln();
    let (l, c, r) = (ln(envelope[k - 1]), ln(envelope[k]), ln(envelope[k + 1]));
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return k as f64;
    }
    k as f64 + 0.5 * (l - r) / denom
}

/// Low-quefrency part of a one-sided real log-spectrum.
fn lifter(log_spec: &[f64], keep: usize, fft: &dyn rustfft::Fft<f64>, buf: &mut [Complex64], out: &mut [f64]) {
    let bins = log_spec.len();
    let n = buf.len();
    for (k, b) in buf.iter_mut().enumerate() {
        let v = if k < bins { log_spec[k] } else { log_spec[n - k] };
        *b = Complex64::new(v, 0.0);
    }
    // Real, even input: forward and inverse transforms coincide up to 1/n.
    fft.process(buf);
    for (q, c) in buf.iter_mut().enumerate() {
        if q.min(n - q) >= keep {
            *c = Complex64::default();
        }
    }
    fft.process(buf);
    for (o, b) in out.iter_mut().zip(buf.iter()) {
        *o = b.re / n as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{hann, Complex64};

    #[test]
    fn flat_spectrum_stays_flat() {
        let env = spectral_envelope(&vec![0.37; 513]);
        for e in env {
            assert!((e / 0.37 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn zero_frame_gives_zero_envelope() {
        assert!(spectral_envelope(&vec![0.0; 513]).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn envelope_is_non_negative_and_smooth() {
        let mags: Vec<f64> = (0..513).map(|k| if k % 13 == 0 { 1.0 } else { 0.01 }).collect();
        let env = spectral_envelope(&mags);
        assert!(env.iter().all(|&e| e >= 0.0 && e.is_finite()));
    }

    /// Oracle: a frame built from 200 Hz harmonics whose amplitudes follow a
    /// resonance centred on a known frequency; the envelope peak must land on
    /// that frequency's bin. Below about 1.2 kHz a 30-coefficient envelope of a
    /// single frame rings against the mirrored image at negative frequencies,
    /// so the formants here sit above that.
    #[test]
    fn harmonic_spectrum_envelope_peaks_at_formant() {
        let rate = 16000.0;
        let n = 1024;
        for formant in [1000.0, 1800.0, 2200.0, 2600.0, 3000.0] {
            let amp = |f: f64| 1.0 / (1.0 + ((f - formant) / 150.0).powi(2));
            let w = hann(n);
            let mut buf: Vec<Complex64> = (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    let x: f64 = (1..40)
                        .map(|h| {
                            let f = 200.0 * h as f64;
                            amp(f) * (2.0 * std::f64::consts::PI * f * t).cos()
                        })
                        .sum();
                    Complex64::new(x * w[i], 0.0)
                })
                .collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
            let mags: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm()).collect();
            let env = spectral_envelope(&mags);
            let peak = env.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let expected = (formant * n as f64 / rate).round() as i64;
            assert!((peak as i64 - expected).abs() <= 2, "formant {formant}: peak bin {peak}, expected {expected}");
        }
    }
}

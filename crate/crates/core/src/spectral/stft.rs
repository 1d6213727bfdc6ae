use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{hann, SpectralError};
use crate::audio_io::AudioClip;

/// How the signal is extended before framing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Frames start at sample 0; `1 + (len - fft_size) / hop` frames. Samples
    /// past the last full frame are not represented.
    None,
    /// `fft_size - hop` zeros in front and at least as many behind, so every
    /// input sample is covered by the same number of frames and ISTFT
    /// reconstructs the whole signal.
    Full,
}

/// Hann-windowed short-time spectrum, `frame_count × (fft_size/2 + 1)`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub fft_size: usize,
    pub hop: usize,
    pub padding: Padding,
    /// Unpadded signal length in samples.
    pub signal_len: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.fft_size as f64
    }

    fn front_pad(&self) -> usize {
        match self.padding {
            Padding::None => 0,
            Padding::Full => self.fft_size - self.hop,
        }
    }
}

/// STFT with full padding (see [`Padding::Full`]).
pub fn stft(clip: &AudioClip, fft_size: usize, hop: usize) -> Result<Spectrogram, SpectralError> {
    stft_with(clip, fft_size, hop, Padding::Full)
}

pub fn stft_with(
    clip: &AudioClip,
    fft_size: usize,
    hop: usize,
    padding: Padding,
) -> Result<Spectrogram, SpectralError> {
    if !fft_size.is_power_of_two() {
        return Err(SpectralError::FftSizeNotPowerOfTwo(fft_size));
    }
    if hop == 0 || hop > fft_size {
        return Err(SpectralError::InvalidHop { hop, fft_size });
    }
    let len = clip.len();
    if len < fft_size {
        return Err(SpectralError::TooShort { len, needed: fft_size });
    }

    let padded: Vec<f64> = match padding {
        Padding::None => clip.samples.clone(),
        Padding::Full => {
            let front = fft_size - hop;
            let min_len = front + len + front;
            let frames = (min_len - fft_size).div_ceil(hop) + 1;
            let total = (frames - 1) * hop + fft_size;
            let mut buf = vec![0.0; total];
            buf[front..front + len].copy_from_slice(&clip.samples);
            buf
        }
    };

    let frame_count = 1 + (padded.len() - fft_size) / hop;
    let window = hann(fft_size);
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let bins = fft_size / 2 + 1;
    let mut buf = vec![Complex64::default(); fft_size];
    let frames = (0..frame_count)
        .map(|f| {
            let start = f * hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(padded[start + i] * window[i], 0.0);
            }
            fft.process(&mut buf);
            buf[..bins].to_vec()
        })
        .collect();

    Ok(Spectrogram { frames, fft_size, hop, padding, signal_len: len, sample_rate: clip.sample_rate })
}

/// Weighted overlap-add inverse: each frame is windowed again and the sum is
/// divided by the accumulated squared window, which inverts [`stft`] exactly
/// wherever the window sum is non-zero. Output has `signal_len` samples.
pub fn istft(spec: &Spectrogram) -> Vec<f64> {
    let n = spec.fft_size;
    let bins = spec.bins();
    let total = (spec.frame_count().max(1) - 1) * spec.hop + n;
    let window = hann(n);
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::default(); n];

    for (f, frame) in spec.frames.iter().enumerate() {
        buf[..bins].copy_from_slice(&frame[..bins]);
        for k in bins..n {
            buf[k] = frame[n - k].conj();
        }
        ifft.process(&mut buf);
        let start = f * spec.hop;
        for i in 0..n {
            acc[start + i] += buf[i].re / n as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }

    let front = spec.front_pad();
    (0..spec.signal_len)
        .map(|i| {
            let j = front + i;
            if j < total && norm[j] > 1e-10 {
                acc[j] / norm[j]
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn full_padding_round_trips(extra in 0usize..3000, fft_pow in 6u32..11, hop_div in prop::sample::select(vec![2usize, 4, 8]), seed in any::<u64>()) {
            let fft_size = 1usize << fft_pow;
            let samples = synth::white_noise(0.5, (fft_size + extra) as f64 / 16000.0, 16000, seed).samples;
            let clip = AudioClip::new("p", samples.clone(), 16000);
            let back = istft(&stft(&clip, fft_size, fft_size / hop_div).unwrap());
            prop_assert_eq!(back.len(), samples.len());
            let err = back.iter().zip(&samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-9, "max error {}", err);
        }
    }

    #[test]
    fn zero_signal_gives_zero_frames() {
        let clip = AudioClip::new("z", vec![0.0; 4096], 16000);
        let spec = stft(&clip, 1024, 256).unwrap();
        assert!(spec.frames.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn unpadded_frame_count_formula() {
        for len in [1024usize, 1025, 2000, 5000] {
            let clip = AudioClip::new("x", vec![0.1; len], 16000);
            let spec = stft_with(&clip, 1024, 256, Padding::None).unwrap();
            assert_eq!(spec.frame_count(), 1 + (len - 1024) / 256);
        }
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        // bin = f * fft_size / rate = 1000 * 1024 / 16000 = 64
        let clip = synth::sine(1000.0, 0.5, 0.5, 16000);
        let spec = stft_with(&clip, 1024, 256, Padding::None).unwrap();
        for frame in &spec.frames {
            let peak = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0;
            assert_eq!(peak, 64);
        }
    }

    #[test]
    fn white_noise_round_trip() {
        let clip = synth::white_noise(0.3, 1.0, 16000, 11);
        let spec = stft(&clip, 1024, 256).unwrap();
        let y = istft(&spec);
        assert_eq!(y.len(), clip.len());
        let rms = (clip.samples.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rms <= 1e-6, "rms {rms}");
    }

    #[test]
    fn rejects_bad_configs() {
        let clip = AudioClip::new("x", vec![0.0; 100], 16000);
        assert!(matches!(stft(&clip, 1000, 250), Err(SpectralError::FftSizeNotPowerOfTwo(1000))));
        assert!(matches!(stft(&clip, 64, 0), Err(SpectralError::InvalidHop { .. })));
        assert!(matches!(stft(&clip, 128, 32), Err(SpectralError::TooShort { len: 100, needed: 128 })));
    }
}

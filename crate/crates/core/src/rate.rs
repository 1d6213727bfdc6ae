//! Speaking-rate transformation: DTW alignment of feature sequences and
//! WSOLA resynthesis at the aligned local rate.

use crate::audio_io::AudioClip;
use crate::spectral::{extract_features, hann, median, FeatureMatrix, SpectralError};

pub const FACTOR_RANGE: (f64, f64) = (0.25, 4.0);
const SLOPE_HALF_WINDOW: usize = 2;
const SMOOTHING_WIDTH: usize = 5;
const GRAIN_SECS: f64 = 0.025;
const TOLERANCE_SECS: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum RateError {
    #[error("cannot align an empty feature sequence")]
    Empty,
    #[error("feature dimensions differ: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("warp path needs at least 2 pairs")]
    DegeneratePath,
    #[error("rate factor {0} outside [0.25, 4.0]")]
    FactorOutOfRange(f64),
    #[error("rate curve is empty")]
    EmptyCurve,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl WarpPath {
    /// Starts at (0,0), ends at (M-1,N-1) and moves by (1,0), (0,1) or (1,1).
    pub fn is_valid(&self, m: usize, n: usize) -> bool {
        let Some(&first) = self.pairs.first() else { return false };
        first == (0, 0)
            && self.pairs.last() == Some(&(m - 1, n - 1))
            && self.pairs.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }
}

/// Local time-scale factor for each source frame (output time per input time).
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub factors: Vec<f64>,
    pub frame_shift: f64,
}

impl RateCurve {
    pub fn constant(factor: f64, frames: usize, frame_shift: f64) -> Self {
        Self { factors: vec![factor; frames.max(1)], frame_shift }
    }

    pub fn mean_factor(&self) -> f64 {
        self.factors.iter().sum::<f64>() / self.factors.len().max(1) as f64
    }
}

fn frame_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum::<f64>().sqrt()
}

/// Minimum-cost alignment under Euclidean frame distance with unweighted
/// steps (1,0), (0,1), (1,1).
pub fn dtw_align(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<WarpPath, RateError> {
    if a.frame_count == 0 || b.frame_count == 0 {
        return Err(RateError::Empty);
    }
    if a.dim != b.dim {
        return Err(RateError::DimensionMismatch { a: a.dim, b: b.dim });
    }
    let (m, n) = (a.frame_count, b.frame_count);
    let mut table = vec![f64::INFINITY; m * n];
    let at = |i: usize, j: usize| i * n + j;
    for i in 0..m {
        for j in 0..n {
            let d = frame_distance(a.row(i), b.row(j));
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(table[at(i - 1, j - 1)]);
                }
                if i > 0 {
                    best = best.min(table[at(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(table[at(i, j - 1)]);
                }
                best
            };
            table[at(i, j)] = d + prev;
        }
    }

    let mut pairs = vec![(m - 1, n - 1)];
    let (mut i, mut j) = (m - 1, n - 1);
    while i > 0 || j > 0 {
        // Ties go to the diagonal, then to the step in the source axis.
        let mut step = None;
        let mut best = f64::INFINITY;
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            if i >= di && j >= dj {
                let v = table[at(i - di, j - dj)];
                if v < best {
                    best = v;
                    step = Some((di, dj));
                }
            }
        }
        let (di, dj) = step.expect("finite predecessor");
        i -= di;
        j -= dj;
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(WarpPath { pairs, cost: table[at(m - 1, n - 1)] })
}

/// Per-source-frame factors from the path slope over a 5-frame window,
/// median-smoothed, clamped, and rescaled so they sum to the target length.
pub fn path_to_rate_curve(path: &WarpPath, frame_shift: f64) -> Result<RateCurve, RateError> {
    if path.pairs.len() < 2 {
        return Err(RateError::DegeneratePath);
    }
    let m = path.pairs.iter().map(|p| p.0).max().unwrap() + 1;
    let n = path.pairs.iter().map(|p| p.1).max().unwrap() + 1;
    if m == 1 {
        let f = (n as f64).clamp(FACTOR_RANGE.0, FACTOR_RANGE.1);
        return Ok(RateCurve { factors: vec![f], frame_shift });
    }

    // Centre of the target span each source frame maps to.
    let mut lo = vec![usize::MAX; m];
    let mut hi = vec![0usize; m];
    for &(i, j) in &path.pairs {
        lo[i] = lo[i].min(j);
        hi[i] = hi[i].max(j);
    }
    let centre: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| (l + h) as f64 / 2.0).collect();

    let raw: Vec<f64> = (0..m)
        .map(|i| {
            let a = i.saturating_sub(SLOPE_HALF_WINDOW);
            let b = (i + SLOPE_HALF_WINDOW).min(m - 1);
            (centre[b] - centre[a]) / (b - a) as f64
        })
        .collect();

    let half = SMOOTHING_WIDTH / 2;
    let clamp = |f: f64| f.clamp(FACTOR_RANGE.0, FACTOR_RANGE.1);
    let smoothed: Vec<f64> = (0..m)
        .map(|i| {
            let mut w: Vec<f64> = raw[i.saturating_sub(half)..(i + half + 1).min(m)].to_vec();
            clamp(median(&mut w).unwrap())
        })
        .collect();
    Ok(RateCurve { factors: rescale_to(smoothed, n as f64), frame_shift })
}

/// Scales the factors so they sum to `target`, redistributing whatever the
/// clamp removes over the factors that are still free.
fn rescale_to(mut factors: Vec<f64>, target: f64) -> Vec<f64> {
    for _ in 0..factors.len() + 1 {
        let total: f64 = factors.iter().sum();
        if (total - target).abs() <= 1e-9 * target {
            break;
        }
        let up = target > total;
        let free: f64 = factors
            .iter()
            .filter(|&&f| if up { f < FACTOR_RANGE.1 } else { f > FACTOR_RANGE.0 })
            .sum();
        if free <= 0.0 {
            break;
        }
        let scale = (target - (total - free)) / free;
        for f in &mut factors {
            if (up && *f < FACTOR_RANGE.1) || (!up && *f > FACTOR_RANGE.0) {
                *f = (*f * scale).clamp(FACTOR_RANGE.0, FACTOR_RANGE.1);
            }
        }
    }
    factors
}

/// Output length in samples implied by a curve: each input sample
/// contributes its frame's factor.
pub fn target_length(len: usize, rate: u32, curve: &RateCurve) -> usize {
    let per_frame = curve.frame_shift * f64::from(rate);
    let total: f64 = (0..len).map(|n| factor_at(curve, n as f64, per_frame)).sum();
    total.round() as usize
}

fn factor_at(curve: &RateCurve, pos: f64, per_frame: f64) -> f64 {
    let k = (pos / per_frame).floor().max(0.0) as usize;
    curve.factors[k.min(curve.factors.len() - 1)]
}

/// WSOLA time-scale modification following a (possibly time-varying) curve.
pub fn apply_rate(clip: &AudioClip, curve: &RateCurve) -> Result<AudioClip, RateError> {
    if curve.factors.is_empty() || !(curve.frame_shift > 0.0) {
        return Err(RateError::EmptyCurve);
    }
    if let Some(&bad) = curve.factors.iter().find(|f| !(FACTOR_RANGE.0..=FACTOR_RANGE.1).contains(*f)) {
        return Err(RateError::FactorOutOfRange(bad));
    }
    clip.ensure_non_empty().map_err(|_| RateError::Empty)?;

    let rate = clip.sample_rate;
    let grain = ((GRAIN_SECS * f64::from(rate)).round() as usize).max(4);
    let hop = grain / 2;
    let tolerance = (TOLERANCE_SECS * f64::from(rate)).round() as usize;
    let per_frame = curve.frame_shift * f64::from(rate);
    let target = target_length(clip.len(), rate, curve);

    // Zero padding on both sides keeps every candidate grain in range.
    let pad = grain + tolerance;
    let mut x = vec![0.0; pad];
    x.extend_from_slice(&clip.samples);
    x.extend(std::iter::repeat_n(0.0, pad + grain));
    let window = hann(grain);

    let mut out = vec![0.0; target + grain];
    let mut wsum = vec![0.0; target + grain];
    let mut nominal = 0.0f64;
    let mut prev: Option<usize> = None;
    let last_start = (clip.len() + pad) as f64;
    let mut m = 0usize;
    while m * hop < target {
        let centre = pad as f64 + nominal;
        let base = centre.round().min(last_start) as usize;
        let pos = match prev {
            None => base,
            Some(p) => {
                let natural = &x[p + hop..p + hop + grain];
                let mut best = (f64::NEG_INFINITY, base);
                for cand in base - tolerance..=base + tolerance {
                    let score: f64 = natural.iter().zip(&x[cand..cand + grain]).map(|(a, b)| a * b).sum();
                    if score > best.0 {
                        best = (score, cand);
                    }
                }
                best.1
            }
        };
        let start = m * hop;
        for k in 0..grain {
            out[start + k] += window[k] * x[pos + k];
            wsum[start + k] += window[k];
        }
        prev = Some(pos);
        nominal += hop as f64 / factor_at(curve, nominal, per_frame);
        m += 1;
    }

    // The first grain's rising half is the only place the window sum falls
    // below one; there the output is the input itself.
    let samples = (0..target)
        .map(|n| if wsum[n] > 1e-3 { out[n] / wsum[n] } else { x[pad + n.min(clip.len() - 1)] })
        .collect();
    Ok(clip.with_samples(samples))
}

/// Align `normal` to `clp` and resynthesize `normal` at the aligned rate.
pub fn match_rate(normal: &AudioClip, clp: &AudioClip) -> Result<AudioClip, RateError> {
    let (a, _) = extract_features(normal)?;
    let (b, _) = extract_features(clp)?;
    let path = dtw_align(&a, &b)?;
    let curve = path_to_rate_curve(&path, a.frame_shift)?;
    apply_rate(normal, &curve)
}

pub fn file_suffix(factor: f64) -> String {
    format!("_rate{factor:.2}")
}

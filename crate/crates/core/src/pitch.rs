//! Duration-preserving pitch modification by time-domain PSOLA.

use crate::audio_io::AudioClip;
use crate::spectral::{estimate_f0, frame_grid, PitchTrack};

pub const BETA_RANGE: (f64, f64) = (0.5, 2.0);
/// Frame shift of the pitch track that drives epoch marking.
pub const ANALYSIS_SHIFT: f64 = 0.005;
/// Clips with fewer voiced frames than this pass through unchanged.
pub const MIN_VOICED_FRACTION: f64 = 0.1;
const CROSSFADE_SECS: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum PitchError {
    #[error("pitch factor {0} outside [0.5, 2.0]")]
    BetaOutOfRange(f64),
    #[error("{group} group needs at least 2 speaker means, got {count}")]
    TooFewSpeakers { group: &'static str, count: usize },
    #[error("normal-group mean F0 values have zero variance")]
    ZeroVariance,
    #[error("non-finite or non-positive mean F0 {0}")]
    InvalidF0(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchModSpec {
    pub beta: f64,
}

impl PitchModSpec {
    pub fn new(beta: f64) -> Result<Self, PitchError> {
        if !(BETA_RANGE.0..=BETA_RANGE.1).contains(&beta) {
            return Err(PitchError::BetaOutOfRange(beta));
        }
        Ok(Self { beta })
    }
}

/// Result of [`compute_beta`]. `raw` is the unclamped ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEstimate {
    pub beta: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl BetaEstimate {
    pub fn spec(&self) -> PitchModSpec {
        PitchModSpec { beta: self.beta }
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Ratio of the population standard deviations of per-speaker mean F0,
/// CLP over normal, clamped into [`BETA_RANGE`].
pub fn compute_beta(clp_mean_f0s: &[f64], normal_mean_f0s: &[f64]) -> Result<BetaEstimate, PitchError> {
    for (group, values) in [("CLP", clp_mean_f0s), ("normal", normal_mean_f0s)] {
        if values.len() < 2 {
            return Err(PitchError::TooFewSpeakers { group, count: values.len() });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(PitchError::InvalidF0(bad));
        }
    }
    let normal = population_std(normal_mean_f0s);
    if normal <= 0.0 {
        return Err(PitchError::ZeroVariance);
    }
    let raw = population_std(clp_mean_f0s) / normal;
    let beta = raw.clamp(BETA_RANGE.0, BETA_RANGE.1);
    let clamped = beta != raw;
    if clamped {
        log::warn!("pitch factor {raw:.3} clamped to {beta}");
    }
    Ok(BetaEstimate { beta, raw, clamped })
}

/// Per-sample voicing and period (in samples) from a frame-level track.
struct Contour {
    voiced: Vec<bool>,
    period: Vec<f64>,
}

fn sample_contour(len: usize, rate: u32, track: &PitchTrack) -> Contour {
    let grid = frame_grid(len, rate, track.frame_shift);
    let mut voiced = vec![false; len];
    let mut period = vec![0.0; len];
    if track.is_empty() || grid.hop == 0 {
        return Contour { voiced, period };
    }
    let half = grid.len as f64 / 2.0;
    let last = track.len() - 1;
    for n in 0..len {
        let k = ((n as f64 - half) / grid.hop as f64).round().clamp(0.0, last as f64) as usize;
        if track.voicing[k] && track.f0[k] > 0.0 {
            voiced[n] = true;
            period[n] = f64::from(rate) / track.f0[k];
        }
    }
    Contour { voiced, period }
}

fn voiced_runs(voiced: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (n, &v) in voiced.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(n),
            (false, Some(s)) => {
                runs.push((s, n));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, voiced.len()));
    }
    runs
}

/// Period at `n`, falling back to the nearest voiced sample inside the run.
fn period_at(contour: &Contour, n: usize, run: (usize, usize)) -> f64 {
    let n = n.clamp(run.0, run.1 - 1);
    contour.period[n]
}

fn argmax_in(x: &[f64], polarity: f64, lo: usize, hi: usize) -> usize {
    (lo..hi).max_by(|&a, &b| (polarity * x[a]).total_cmp(&(polarity * x[b]))).unwrap_or(lo)
}

/// Analysis epochs: one per period at the waveform peak, searched within a
/// quarter period of the predicted position. The marks extend one period
/// beyond both ends of the run so its edges are fully covered by grains.
fn epoch_marks(x: &[f64], contour: &Contour, run: (usize, usize)) -> Vec<usize> {
    let (a, b) = run;
    let p0 = period_at(contour, a, run);
    let start = a.saturating_sub(p0.round() as usize);
    let end = (b + period_at(contour, b - 1, run).round() as usize).min(x.len());
    let strongest = (a..b).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap();
    let polarity = if x[strongest] < 0.0 { -1.0 } else { 1.0 };

    let mut marks = vec![argmax_in(x, polarity, start, (start + p0.round().max(1.0) as usize).min(end))];
    loop {
        let t = *marks.last().unwrap();
        let p = period_at(contour, t, run);
        let predicted = t as f64 + p;
        let lo = (predicted - p / 4.0).ceil().max(t as f64 + 1.0) as usize;
        let hi = ((predicted + p / 4.0).floor() as usize + 1).min(end);
        if lo >= hi {
            break;
        }
        marks.push(argmax_in(x, polarity, lo, hi));
    }
    marks
}

fn nearest_mark(marks: &[usize], s: f64) -> usize {
    let i = marks.partition_point(|&t| (t as f64) < s);
    if i == 0 {
        0
    } else if i == marks.len() || s - marks[i - 1] as f64 <= marks[i] as f64 - s {
        i - 1
    } else {
        i
    }
}

/// PSOLA over one voiced run, returning the run's samples.
fn psola_run(x: &[f64], contour: &Contour, run: (usize, usize), beta: f64) -> Vec<f64> {
    let marks = epoch_marks(x, contour, run);
    let (a, b) = run;
    let spacing = |i: usize| -> f64 {
        if i + 1 < marks.len() {
            (marks[i + 1] - marks[i]) as f64
        } else {
            period_at(contour, marks[i], run)
        }
    };
    let left_len = |i: usize| -> f64 {
        if i > 0 {
            (marks[i] - marks[i - 1]) as f64
        } else {
            period_at(contour, marks[0], run)
        }
    };

    let mut acc = vec![0.0; b - a];
    let mut wsum = vec![0.0; b - a];
    let stop = marks.last().map_or(b, |&t| t.max(b)) as f64;
    let mut s = marks[0] as f64;
    while s <= stop {
        let i = nearest_mark(&marks, s);
        let t = marks[i] as f64;
        let (left, right) = (left_len(i), spacing(i));
        let shift = s.round() as i64 - t as i64;
        let lo = (t - left).ceil().max(0.0) as usize;
        let hi = ((t + right).floor() as usize).min(x.len() - 1);
        for src in lo..=hi {
            let dst = src as i64 + shift;
            if dst < a as i64 || dst >= b as i64 {
                continue;
            }
            let d = src as f64 - t;
            let w = if d < 0.0 {
                0.5 + 0.5 * (std::f64::consts::PI * d / left).cos()
            } else {
                0.5 + 0.5 * (std::f64::consts::PI * d / right).cos()
            };
            let k = dst as usize - a;
            acc[k] += w * x[src];
            wsum[k] += w;
        }
        s += right / beta;
    }
    acc.iter().zip(&wsum).map(|(v, w)| v / w.max(1.0)).collect()
}

/// Pitch modification by `spec.beta` with the clip length unchanged.
///
/// Clips with fewer than 10% voiced frames are returned unchanged.
pub fn apply_pitch_mod(clip: &AudioClip, spec: &PitchModSpec) -> Result<AudioClip, PitchError> {
    PitchModSpec::new(spec.beta)?;
    let track = estimate_f0(clip, ANALYSIS_SHIFT);
    if track.voiced_fraction() < MIN_VOICED_FRACTION {
        log::warn!(
            "{}: only {:.0}% voiced frames, pitch modification skipped",
            clip.id,
            100.0 * track.voiced_fraction()
        );
        return Ok(clip.clone());
    }
    apply_pitch_mod_with_track(clip, spec, &track)
}

/// As [`apply_pitch_mod`] with a precomputed pitch track and no voicing gate.
pub fn apply_pitch_mod_with_track(
    clip: &AudioClip,
    spec: &PitchModSpec,
    track: &PitchTrack,
) -> Result<AudioClip, PitchError> {
    PitchModSpec::new(spec.beta)?;
    let x = &clip.samples;
    let contour = sample_contour(x.len(), clip.sample_rate, track);
    let fade = ((CROSSFADE_SECS * f64::from(clip.sample_rate)).round() as usize).max(1);
    let mut out = x.clone();
    for run in voiced_runs(&contour.voiced) {
        let (a, b) = run;
        let min_len = 2.0 * contour.period[a];
        if ((b - a) as f64) < min_len {
            continue;
        }
        let modified = psola_run(x, &contour, run, spec.beta);
        let ramp = fade.min((b - a) / 2).max(1);
        for (k, m) in modified.into_iter().enumerate() {
            let from_edge = k.min(b - a - 1 - k);
            let g = if from_edge >= ramp { 1.0 } else { (from_edge as f64 + 0.5) / ramp as f64 };
            out[a + k] = g * m + (1.0 - g) * x[a + k];
        }
    }
    Ok(clip.with_samples(out))
}

pub fn file_suffix(beta: f64) -> String {
    format!("_pitch{beta:.2}")
}

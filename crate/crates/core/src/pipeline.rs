//! Batch augmentation runs over a manifest.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! manifest.jsonl            originals (absolute paths) + augmented records
//! run_log.jsonl             one line per augmented record, in plan order
//! <method>/<id>.wav         augmented audio (or .mcp1 for cyclegan-features)
//! cyclegan_handoff.jsonl    cyclegan-features only
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::audio_io::{canonicalize, load_wav, save_wav, AudioClip};
use crate::manifest::{load_manifest, plan_doubling, write_manifest, Method, Origin, UtteranceRecord};
use crate::pitch::{apply_pitch_mod, PitchModSpec};
use crate::rate::{apply_rate, match_rate, RateCurve, FACTOR_RANGE};
use crate::reverb::{apply_reverb, default_room, generate_rir, ImpulseResponse};
use crate::spectral::{extract_features, write_features};
use crate::vtlp::{apply_vtlp, WarpSpec};
use crate::Error;

pub const OUTPUT_MANIFEST: &str = "manifest.jsonl";
pub const RUN_LOG: &str = "run_log.jsonl";
pub const HANDOFF_MANIFEST: &str = "cyclegan_handoff.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("method {method} needs --{param}")]
    MissingParam { method: Method, param: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `<normal-id> <clp-wav>`")]
    MalformedPairs { path: PathBuf, line: usize },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Run-wide method parameters. Per-record values (the VTLP warp factor and
/// the simulated room) come from the plan unless overridden here.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MethodParams {
    pub alpha: Option<f64>,
    pub rir: Option<PathBuf>,
    pub beta: Option<f64>,
    pub factor: Option<f64>,
    /// Pairing file: `<normal-id> <clp-wav>` per line.
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    pub input_manifest: PathBuf,
    pub output_dir: PathBuf,
    pub params: MethodParams,
    pub worker_count: usize,
}

/// A fully resolved augmentation for one clip.
#[derive(Debug, Clone)]
pub enum Augmentation {
    Vtlp(WarpSpec),
    Reverb(ImpulseResponse),
    Pitch(PitchModSpec),
    RateFactor(f64),
    RateMatch(AudioClip),
}

/// Applies one augmentation to a clip at the canonical rate.
pub fn augment_clip(clip: &AudioClip, aug: &Augmentation) -> Result<AudioClip, Error> {
    Ok(match aug {
        Augmentation::Vtlp(spec) => apply_vtlp(clip, spec)?,
        Augmentation::Reverb(rir) => apply_reverb(clip, rir)?,
        Augmentation::Pitch(spec) => apply_pitch_mod(clip, spec)?,
        Augmentation::RateFactor(f) => apply_rate(clip, &RateCurve::constant(*f, 1, 0.005))?,
        Augmentation::RateMatch(target) => match_rate(clip, target)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordFailure {
    pub id: String,
    pub source_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub planned: usize,
    pub succeeded: usize,
    pub failures: Vec<RecordFailure>,
    pub output_manifest: PathBuf,
}

impl RunSummary {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    id: &'a str,
    source_id: &'a str,
    method: Method,
    params: &'a BTreeMap<String, serde_json::Value>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clipped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct HandoffLine<'a> {
    id: &'a str,
    source_id: &'a str,
    speaker: &'a str,
    group: crate::manifest::Group,
    gender: crate::manifest::Gender,
    features: &'a Path,
    frame_count: usize,
    dim: usize,
    frame_shift: f64,
}

/// What a successful record produced.
struct Produced {
    samples: usize,
    clipped: usize,
    frames: Option<(usize, usize, f64)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_pairs(path: &Path) -> Result<HashMap<String, PathBuf>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [id, wav] => {
                pairs.insert((*id).to_owned(), resolve(base, Path::new(wav)));
            }
            _ => return Err(PipelineError::MalformedPairs { path: path.to_path_buf(), line: i + 1 }),
        }
    }
    Ok(pairs)
}

fn load_canonical(path: &Path) -> Result<AudioClip, Error> {
    Ok(canonicalize(&load_wav(path)?)?)
}

fn validate(config: &RunConfig) -> Result<(), PipelineError> {
    if config.worker_count == 0 {
        return Err(PipelineError::InvalidWorkers);
    }
    let p = &config.params;
    match config.method {
        Method::Vtlp => {
            if let Some(a) = p.alpha {
                WarpSpec::new(a).map_err(|e| PipelineError::InvalidParam(e.to_string()))?;
            }
        }
        Method::Pitch => {
            let beta = p.beta.ok_or(PipelineError::MissingParam { method: Method::Pitch, param: "beta" })?;
            PitchModSpec::new(beta).map_err(|e| PipelineError::InvalidParam(e.to_string()))?;
        }
        Method::Rate => {
            if p.factor.is_none() && p.pairs.is_none() {
                return Err(PipelineError::MissingParam { method: Method::Rate, param: "factor" });
            }
            if let Some(f) = p.factor {
                if !(FACTOR_RANGE.0..=FACTOR_RANGE.1).contains(&f) {
                    return Err(PipelineError::InvalidParam(format!("rate factor {f} outside [0.25, 4.0]")));
                }
            }
        }
        Method::Reverb | Method::CycleganFeatures => {}
    }
    Ok(())
}

/// Plans the doubling of `config.input_manifest`, augments every original in
/// parallel and writes the outputs. Failed records are reported in the
/// summary and left out of the output manifest.
pub fn run_augmentation(config: &RunConfig) -> Result<RunSummary, Error> {
    validate(config)?;
    let records = load_manifest(&config.input_manifest)?;
    let manifest_dir = config.input_manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let manifest_dir = std::path::absolute(&manifest_dir).map_err(io_err(&manifest_dir))?;

    let method = config.method;
    let mut plan = plan_doubling(&records, method, config.seed);
    let n = plan.len() / 2;
    for r in &mut plan[n..] {
        if let Origin::Augmented { params, .. } = &mut r.origin {
            add_run_params(params, &config.params);
        }
    }

    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir.join(method.as_str())).map_err(io_err(out_dir))?;

    let fixed_rir = match &config.params.rir {
        Some(path) => Some(ImpulseResponse::from_clip(&load_canonical(path)?)),
        None => None,
    };
    let pairs = match &config.params.pairs {
        Some(path) => load_pairs(path)?,
        None => HashMap::new(),
    };

    let sources: HashMap<&str, &UtteranceRecord> = plan[..n].iter().map(|r| (r.id.as_str(), r)).collect();
    let job = |record: &UtteranceRecord| -> Result<Produced, Error> {
        let Origin::Augmented { source_id, params, .. } = &record.origin else { unreachable!() };
        let source = sources[source_id.as_str()];
        let clip = load_canonical(&resolve(&manifest_dir, &source.path))?;
        let out_path = out_dir.join(&record.path);
        if method == Method::CycleganFeatures {
            let (features, pitch) = extract_features(&clip)?;
            write_features(&out_path, &features, &pitch)?;
            return Ok(Produced {
                samples: clip.len(),
                clipped: 0,
                frames: Some((features.frame_count, features.dim, features.frame_shift)),
            });
        }
        let aug = resolve_augmentation(method, params, &config.params, fixed_rir.as_ref(), &pairs, source_id)?;
        let mut out = augment_clip(&clip, &aug)?;
        out.id = record.id.clone();
        let clipped = save_wav(&out, &out_path)?;
        Ok(Produced { samples: out.len(), clipped, frames: None })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let results: Vec<Result<Produced, Error>> = pool.install(|| plan[n..].par_iter().map(job).collect());

    let mut manifest_out: Vec<UtteranceRecord> = plan[..n]
        .iter()
        .map(|r| UtteranceRecord { path: resolve(&manifest_dir, &r.path), ..r.clone() })
        .collect();
    let mut log = String::new();
    let mut handoff = String::new();
    let mut failures = Vec::new();
    for (record, result) in plan[n..].iter().zip(&results) {
        let Origin::Augmented { source_id, params, .. } = &record.origin else { unreachable!() };
        let mut line = LogLine {
            id: &record.id,
            source_id,
            method,
            params,
            status: "ok",
            output: None,
            samples: None,
            clipped: None,
            error: None,
        };
        match result {
            Ok(produced) => {
                line.output = Some(&record.path);
                line.samples = Some(produced.samples);
                line.clipped = Some(produced.clipped);
                if produced.clipped > 0 {
                    log::warn!("{}: {} samples clipped", record.id, produced.clipped);
                }
                if let Some((frame_count, dim, frame_shift)) = produced.frames {
                    let h = HandoffLine {
                        id: &record.id,
                        source_id,
                        speaker: &record.speaker,
                        group: record.group,
                        gender: record.gender,
                        features: &record.path,
                        frame_count,
                        dim,
                        frame_shift,
                    };
                    handoff.push_str(&serde_json::to_string(&h).expect("serializable"));
                    handoff.push('\n');
                }
                manifest_out.push(record.clone());
            }
            Err(e) => {
                log::error!("{}: {e}", record.id);
                line.status = "failed";
                line.error = Some(e.to_string());
                failures.push(RecordFailure { id: record.id.clone(), source_id: source_id.clone(), error: e.to_string() });
            }
        }
        log.push_str(&serde_json::to_string(&line).expect("serializable"));
        log.push('\n');
    }

    let output_manifest = out_dir.join(OUTPUT_MANIFEST);
    write_manifest(&output_manifest, &manifest_out)?;
    let log_path = out_dir.join(RUN_LOG);
    std::fs::write(&log_path, log).map_err(io_err(&log_path))?;
    if method == Method::CycleganFeatures {
        let path = out_dir.join(HANDOFF_MANIFEST);
        std::fs::write(&path, handoff).map_err(io_err(&path))?;
    }
    log::info!("{} of {} augmented records written to {}", n - failures.len(), n, out_dir.display());
    Ok(RunSummary { planned: n, succeeded: n - failures.len(), failures, output_manifest })
}

fn add_run_params(params: &mut BTreeMap<String, serde_json::Value>, run: &MethodParams) {
    if let Some(a) = run.alpha {
        params.insert("alpha".into(), a.into());
    }
    if let Some(b) = run.beta {
        params.insert("beta".into(), b.into());
    }
    if let Some(f) = run.factor {
        params.insert("factor".into(), f.into());
    }
    if let Some(r) = &run.rir {
        params.insert("rir".into(), r.display().to_string().into());
    }
}

fn resolve_augmentation(
    method: Method,
    params: &BTreeMap<String, serde_json::Value>,
    run: &MethodParams,
    fixed_rir: Option<&ImpulseResponse>,
    pairs: &HashMap<String, PathBuf>,
    source_id: &str,
) -> Result<Augmentation, Error> {
    let record_seed = params.get("seed").and_then(serde_json::Value::as_u64).unwrap_or_default();
    Ok(match method {
        Method::Vtlp => {
            let alpha = params.get("alpha").and_then(serde_json::Value::as_f64).unwrap_or(1.0);
            Augmentation::Vtlp(WarpSpec::new(alpha)?)
        }
        Method::Reverb => match fixed_rir {
            Some(rir) => Augmentation::Reverb(rir.clone()),
            None => Augmentation::Reverb(generate_rir(&default_room(record_seed))?),
        },
        Method::Pitch => Augmentation::Pitch(PitchModSpec::new(run.beta.unwrap_or(1.0))?),
        Method::Rate => match (pairs.get(source_id), run.factor) {
            (Some(clp), _) => Augmentation::RateMatch(load_canonical(clp)?),
            (None, Some(f)) => Augmentation::RateFactor(f),
            (None, None) => {
                return Err(PipelineError::InvalidParam(format!("no pairing for {source_id} and no --factor")).into())
            }
        },
        Method::CycleganFeatures => unreachable!("features are extracted, not augmented"),
    })
}

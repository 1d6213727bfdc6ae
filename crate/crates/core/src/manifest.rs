//! Utterance manifests (JSONL), speaker folds and the doubling plan.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::eval::PhoneSequence;
use crate::seed;
use crate::vtlp;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: field `severity` must be 0-3, got {value}")]
    InvalidSeverity { line: usize, value: serde_json::Value },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: augmented record {id} names unknown source {source_id}")]
    UnknownSource { line: usize, id: String, source_id: String },
    #[error("speaker {0} is listed with both genders")]
    InconsistentGender(String),
    #[error("folds need at least 3 {gender} speakers in the {group} group, found {found}")]
    InsufficientSpeakers { group: Group, gender: Gender, found: usize },
    #[error("unknown augmentation method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "CLP")]
    Clp,
    #[serde(rename = "NORMAL")]
    Normal,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Clp => "CLP",
            Group::Normal => "NORMAL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::M => "M",
            Gender::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vtlp,
    Reverb,
    Pitch,
    Rate,
    CycleganFeatures,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Vtlp, Method::Reverb, Method::Pitch, Method::Rate, Method::CycleganFeatures];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vtlp => "vtlp",
            Method::Reverb => "reverb",
            Method::Pitch => "pitch",
            Method::Rate => "rate",
            Method::CycleganFeatures => "cyclegan-features",
        }
    }

    /// Extension of the files this method produces.
    pub fn extension(&self) -> &'static str {
        match self {
            Method::CycleganFeatures => "mcp1",
            _ => "wav",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ManifestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| ManifestError::UnknownMethod(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "ORIGINAL")]
    Original,
    #[serde(rename = "AUGMENTED")]
    Augmented {
        method: Method,
        source_id: String,
        #[serde(default)]
        params: BTreeMap<String, serde_json::Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    pub path: PathBuf,
    pub speaker: String,
    pub group: Group,
    pub gender: Gender,
    pub age: u32,
    /// 0 (close to normal) to 3 (severe).
    pub severity: u8,
    pub transcript: PhoneSequence,
    pub origin: Origin,
}

impl UtteranceRecord {
    pub fn is_original(&self) -> bool {
        matches!(self.origin, Origin::Original)
    }
}

pub const MAX_SEVERITY: u8 = 3;

/// Parses and validates JSONL text. Line numbers in errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let mut records: Vec<(usize, UtteranceRecord)> = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| ManifestError::Malformed { line: line_no, message: e.to_string() })?;
        if let Some(sev) = value.get("severity") {
            if !sev.as_u64().is_some_and(|v| v <= u64::from(MAX_SEVERITY)) {
                return Err(ManifestError::InvalidSeverity { line: line_no, value: sev.clone() });
            }
        }
        let record: UtteranceRecord = serde_json::from_value(value)
            .map_err(|e| ManifestError::Malformed { line: line_no, message: e.to_string() })?;
        if record.id.is_empty() {
            return Err(ManifestError::Malformed { line: line_no, message: "empty id".into() });
        }
        if !ids.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId { line: line_no, id: record.id });
        }
        records.push((line_no, record));
    }
    for (line, r) in &records {
        if let Origin::Augmented { source_id, .. } = &r.origin {
            if !ids.contains(source_id) {
                return Err(ManifestError::UnknownSource {
                    line: *line,
                    id: r.id.clone(),
                    source_id: source_id.clone(),
                });
            }
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    parse_manifest(&text)
}

pub fn to_jsonl(records: &[UtteranceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[UtteranceRecord]) -> Result<(), ManifestError> {
    let path = path.as_ref();
    std::fs::write(path, to_jsonl(records)).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    /// Gender of each held-out speaker, e.g. `[F, M]`.
    pub combination: [Gender; 2],
    pub test: [String; 2],
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub group: Group,
    pub folds: [Fold; 3],
}

impl FoldPlan {
    /// Fold index (0-2) in which a speaker is tested, if any.
    pub fn test_fold(&self, speaker: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.test.iter().any(|s| s == speaker))
    }
}

/// Three folds over the CLP speakers holding out female-female,
/// male-male and female-male pairs.
pub fn make_folds(records: &[UtteranceRecord], seed: u64) -> Result<FoldPlan, ManifestError> {
    make_folds_for(records, Group::Clp, seed)
}

/// As [`make_folds`] for any group. The three test pairs are disjoint, so
/// each gender needs at least three speakers.
pub fn make_folds_for(records: &[UtteranceRecord], group: Group, seed: u64) -> Result<FoldPlan, ManifestError> {
    let mut genders: BTreeMap<&str, Gender> = BTreeMap::new();
    for r in records.iter().filter(|r| r.group == group) {
        if let Some(&g) = genders.get(r.speaker.as_str()) {
            if g != r.gender {
                return Err(ManifestError::InconsistentGender(r.speaker.clone()));
            }
        }
        genders.insert(&r.speaker, r.gender);
    }
    let mut rng = seed::rng(seed);
    let mut pick = |gender: Gender| -> Result<Vec<String>, ManifestError> {
        let mut speakers: Vec<String> =
            genders.iter().filter(|(_, &g)| g == gender).map(|(s, _)| (*s).to_owned()).collect();
        if speakers.len() < 3 {
            return Err(ManifestError::InsufficientSpeakers { group, gender, found: speakers.len() });
        }
        speakers.shuffle(&mut rng);
        Ok(speakers)
    };
    let female = pick(Gender::F)?;
    let male = pick(Gender::M)?;

    let all: BTreeSet<&str> = genders.keys().copied().collect();
    let fold = |combination: [Gender; 2], test: [String; 2]| {
        let train = all.iter().filter(|s| !test.iter().any(|t| t == *s)).map(|s| (*s).to_owned()).collect();
        Fold { combination, test, train }
    };
    Ok(FoldPlan {
        group,
        folds: [
            fold([Gender::F, Gender::F], [female[0].clone(), female[1].clone()]),
            fold([Gender::M, Gender::M], [male[0].clone(), male[1].clone()]),
            fold([Gender::F, Gender::M], [female[2].clone(), male[2].clone()]),
        ],
    })
}

/// Deterministic per-record parameters for `method`.
pub fn record_params(method: Method, seed: u64, id: &str) -> BTreeMap<String, serde_json::Value> {
    let rs = seed::record_seed(seed, id);
    let mut params = BTreeMap::new();
    params.insert("seed".to_owned(), serde_json::Value::from(rs));
    if method == Method::Vtlp {
        params.insert("alpha".to_owned(), serde_json::Value::from(vtlp::sample_alpha(rs)));
    }
    params
}

fn augmented_suffix(method: Method, params: &BTreeMap<String, serde_json::Value>) -> String {
    match (method, params.get("alpha").and_then(serde_json::Value::as_f64)) {
        (Method::Vtlp, Some(alpha)) => vtlp::file_suffix(alpha),
        _ => format!("_{}", method.as_str().replace('-', "_")),
    }
}

/// Originals followed by one augmented record per original, in input order.
/// Augmented records already present in the input are dropped.
pub fn plan_doubling(records: &[UtteranceRecord], method: Method, seed: u64) -> Vec<UtteranceRecord> {
    let originals: Vec<&UtteranceRecord> = records.iter().filter(|r| r.is_original()).collect();
    let mut out: Vec<UtteranceRecord> = originals.iter().map(|r| (*r).clone()).collect();
    for r in originals {
        let params = record_params(method, seed, &r.id);
        let id = format!("{}{}", r.id, augmented_suffix(method, &params));
        let path = PathBuf::from(method.as_str()).join(format!("{id}.{}", method.extension()));
        out.push(UtteranceRecord {
            id,
            path,
            origin: Origin::Augmented { method, source_id: r.id.clone(), params },
            ..r.clone()
        });
    }
    out
}

//! Phone error rate scoring.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("reference is empty; PER undefined")]
    EmptyReference,
    #[error("expected exactly 3 fold scores, got {0}")]
    WrongFoldCount(usize),
    #[error("invalid phone label {0:?}")]
    InvalidLabel(String),
    #[error("line {line}: missing utterance id")]
    MissingId { line: usize },
    #[error("line {line}: duplicate utterance id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("hypothesis {0} has no reference")]
    UnknownUtterance(String),
    #[error("no scorable utterances")]
    NothingToScore,
}

/// Ordered phone labels. Serialized as one space-separated string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PhoneSequence {
    pub phones: Vec<String>,
}

impl PhoneSequence {
    pub fn new(phones: Vec<String>) -> Result<Self, EvalError> {
        if let Some(bad) = phones.iter().find(|p| p.is_empty() || p.chars().any(char::is_whitespace)) {
            return Err(EvalError::InvalidLabel(bad.clone()));
        }
        Ok(Self { phones })
    }

    pub fn parse(text: &str) -> Self {
        Self { phones: text.split_whitespace().map(str::to_owned).collect() }
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }
}

impl fmt::Display for PhoneSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.phones.join(" "))
    }
}

impl Serialize for PhoneSequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhoneSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self::parse(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AlignmentCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub hits: usize,
    pub ref_len: usize,
}

impl AlignmentCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl std::ops::Add for AlignmentCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            hits: self.hits + o.hits,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

/// Minimum edit distance alignment with unit costs. On ties the backtrace
/// prefers substitution (or hit), then insertion, then deletion.
pub fn align(reference: &PhoneSequence, hypothesis: &PhoneSequence) -> AlignmentCounts {
    let (r, h) = (&reference.phones, &hypothesis.phones);
    let (n, m) = (r.len(), h.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let ins = d[i * w + j - 1] + 1;
            let del = d[(i - 1) * w + j] + 1;
            d[i * w + j] = sub.min(ins).min(del);
        }
    }

    let mut counts = AlignmentCounts { ref_len: n, ..Default::default() };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + usize::from(r[i - 1] != h[j - 1]) {
            if r[i - 1] == h[j - 1] {
                counts.hits += 1;
            } else {
                counts.substitutions += 1;
            }
            i -= 1;
            j -= 1;
        } else if j > 0 && here == d[i * w + j - 1] + 1 {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// 100 × (S + D + I) / N. Can exceed 100.
pub fn per(counts: &AlignmentCounts) -> Result<f64, EvalError> {
    if counts.ref_len == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(100.0 * counts.errors() as f64 / counts.ref_len as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossfoldReport {
    pub folds: [f64; 3],
    pub mean: f64,
}

/// Unweighted mean over exactly three fold scores.
pub fn crossfold_report(per_fold: &[f64]) -> Result<CrossfoldReport, EvalError> {
    let folds: [f64; 3] = per_fold.try_into().map_err(|_| EvalError::WrongFoldCount(per_fold.len()))?;
    Ok(CrossfoldReport { folds, mean: folds.iter().sum::<f64>() / 3.0 })
}

/// Parses `.trn` text: one `<utt-id> p1 p2 …` per line, blank lines skipped.
pub fn parse_trn(text: &str) -> Result<Vec<(String, PhoneSequence)>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        if !seen.insert(id.to_owned()) {
            return Err(EvalError::DuplicateId { line: idx + 1, id: id.to_owned() });
        }
        out.push((id.to_owned(), PhoneSequence { phones: fields.map(str::to_owned).collect() }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    pub counts: AlignmentCounts,
    /// `None` when the reference is empty.
    pub per: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub utterances: Vec<UtteranceScore>,
    pub totals: AlignmentCounts,
    /// Corpus-level PER: total errors over total reference phones.
    pub corpus_per: f64,
    /// Unweighted mean of per-utterance PERs (empty references excluded).
    pub mean_utterance_per: f64,
}

/// Scores every reference utterance; a reference with no hypothesis counts
/// as an empty hypothesis.
pub fn score(references: &[(String, PhoneSequence)], hypotheses: &[(String, PhoneSequence)]) -> Result<ScoreReport, EvalError> {
    let hyps: BTreeMap<&str, &PhoneSequence> = hypotheses.iter().map(|(id, p)| (id.as_str(), p)).collect();
    let refs: HashSet<&str> = references.iter().map(|(id, _)| id.as_str()).collect();
    if let Some(id) = hyps.keys().find(|id| !refs.contains(*id)) {
        return Err(EvalError::UnknownUtterance((*id).to_owned()));
    }
    let empty = PhoneSequence::default();
    let mut utterances = Vec::with_capacity(references.len());
    let mut totals = AlignmentCounts::default();
    for (id, reference) in references {
        let hyp = hyps.get(id.as_str()).copied().unwrap_or_else(|| {
            log::warn!("no hypothesis for {id}; scoring as empty");
            &empty
        });
        let counts = align(reference, hyp);
        totals = totals + counts;
        utterances.push(UtteranceScore { id: id.clone(), counts, per: per(&counts).ok() });
    }
    let corpus_per = per(&totals).map_err(|_| EvalError::NothingToScore)?;
    let scored: Vec<f64> = utterances.iter().filter_map(|u| u.per).collect();
    let mean_utterance_per = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(ScoreReport { utterances, totals, corpus_per, mean_utterance_per })
}

impl ScoreReport {
    /// Per-utterance TSV followed by a `#`-prefixed summary block.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("utt_id\tref_len\thits\tsub\tdel\tins\tper\n");
        for u in &self.utterances {
            let c = &u.counts;
            let per = u.per.map_or_else(|| "NA".to_owned(), |p| format!("{p:.2}"));
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                u.id, c.ref_len, c.hits, c.substitutions, c.deletions, c.insertions, per
            ));
        }
        let t = &self.totals;
        out.push_str(&format!(
            "# utterances\t{}\n# ref_phones\t{}\n# sub\t{}\n# del\t{}\n# ins\t{}\n# corpus_per\t{:.2}\n# mean_utterance_per\t{:.2}\n",
            self.utterances.len(),
            t.ref_len,
            t.substitutions,
            t.deletions,
            t.insertions,
            self.corpus_per,
            self.mean_utterance_per
        ));
        out
    }
}

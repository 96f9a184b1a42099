//! Policy records, corpus parsing and validation, the ordinal target, splits,
//! and synthetic corpora.
//!
//! # JSONL schema
//!
//! One JSON object per line:
//!
//! | field            | type                         | notes                                   |
//! |------------------|------------------------------|-----------------------------------------|
//! | `id`             | string                       | unique within the corpus                |
//! | `title`          | string                       |                                         |
//! | `body`           | string                       | non-empty after trimming                |
//! | `stage`          | string                       | see [`StageLabel`] for accepted spellings |
//! | `month`          | integer                      | 1–12                                    |
//! | `year`           | integer                      |                                         |
//! | `rapporteurs`    | array of `{name, country, party?}` | optional, defaults to `[]`        |
//! | `spotlight`      | string                       | optional (e.g. `JD21`)                  |
//! | `procedure_type` | string                       | optional (e.g. `COD`)                   |
//! | `procedure_year` | integer                      | optional                                |
//! | `legislative`    | bool                         | optional, defaults to `false`           |
//! | `sidecar_scores` | object of string → number    | optional externally supplied scores     |

mod split;
mod stage;
pub mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use split::{split, SplitError, SplitIndices};
pub use stage::{map_stage, StageLabel, UnknownStage};
pub use synth::{generate_synthetic, SynthError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rapporteur {
    pub name: String,
    pub country: String,
    /// European-Parliament party group; `None` means no major party.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRecord {
    pub id: String,
    pub title: String,
    pub body: String,
    pub stage: StageLabel,
    pub month: u32,
    pub year: i32,
    #[serde(default)]
    pub rapporteurs: Vec<Rapporteur>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spotlight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure_year: Option<i32>,
    #[serde(default)]
    pub legislative: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sidecar_scores: BTreeMap<String, f64>,
}

impl PolicyRecord {
    pub fn target(&self) -> f64 {
        self.stage.value()
    }

    fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.id.trim().is_empty() {
            problems.push("field `id`: must be non-empty".to_string());
        }
        if self.body.trim().is_empty() {
            problems.push("field `body`: must be non-empty after trimming".to_string());
        }
        if !(1..=12).contains(&self.month) {
            problems.push(format!("field `month`: {} is outside 1..=12", self.month));
        }
        for (i, r) in self.rapporteurs.iter().enumerate() {
            if r.country.trim().is_empty() {
                problems.push(format!("field `rapporteurs[{i}].country`: must be non-empty"));
            }
        }
        for (name, v) in &self.sidecar_scores {
            if !v.is_finite() {
                problems.push(format!("field `sidecar_scores.{name}`: not finite"));
            }
        }
        problems
    }
}

/// A validation problem tied to a (1-based) line of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corpus is empty")]
    Empty,
    #[error("{} validation error(s):\n{}", .0.len(), join_lines(.0))]
    Invalid(Vec<LineError>),
    #[error("sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
}

fn join_lines(errors: &[LineError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

/// An ordered, validated, non-empty collection of policies with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<PolicyRecord>,
}

impl Corpus {
    /// Validate records; line numbers in errors are 1-based record positions.
    pub fn new(records: Vec<PolicyRecord>) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut errors = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, record) in records.iter().enumerate() {
            for message in record.check() {
                errors.push(LineError { line: i + 1, message });
            }
            if let Some(first) = seen.insert(record.id.as_str(), i + 1) {
                seen.insert(record.id.as_str(), first);
                errors.push(LineError {
                    line: i + 1,
                    message: format!("duplicate id {:?} (first seen on line {first})", record.id),
                });
            }
        }
        if errors.is_empty() {
            Ok(Corpus { records })
        } else {
            Err(CorpusError::Invalid(errors))
        }
    }

    pub fn records(&self) -> &[PolicyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&PolicyRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Records whose ids appear in `ids`, in the order of `ids`.
    pub fn select(&self, ids: &[String]) -> Vec<&PolicyRecord> {
        let index: HashMap<&str, &PolicyRecord> = self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        ids.iter().filter_map(|id| index.get(id.as_str()).copied()).collect()
    }

    /// Per-stage record counts in legislative order.
    pub fn label_histogram(&self) -> BTreeMap<StageLabel, usize> {
        let mut hist: BTreeMap<StageLabel, usize> = StageLabel::ALL.iter().map(|&s| (s, 0)).collect();
        for r in &self.records {
            *hist.entry(r.stage).or_default() += 1;
        }
        hist
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    /// Merge externally supplied score columns into the records.
    ///
    /// Every id in the sidecar must exist in the corpus; corpus records
    /// missing from the sidecar keep their existing scores.
    pub fn with_sidecar_scores(mut self, scores: &BTreeMap<String, BTreeMap<String, f64>>) -> Result<Self, String> {
        let unknown: Vec<&String> = scores.keys().filter(|id| self.get(id).is_none()).collect();
        if !unknown.is_empty() {
            return Err(format!("ids not present in the corpus: {unknown:?}"));
        }
        for record in &mut self.records {
            if let Some(cols) = scores.get(&record.id) {
                record.sidecar_scores.extend(cols.iter().map(|(k, v)| (k.clone(), *v)));
            }
        }
        Ok(self)
    }
}

/// Parse a JSONL corpus from text. Blank lines are skipped.
pub fn parse_corpus_str(text: &str) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PolicyRecord>(line) {
            Ok(r) => {
                records.push(r);
                lines.push(i + 1);
            }
            Err(e) => errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    match Corpus::new(records) {
        Ok(corpus) if errors.is_empty() => Ok(corpus),
        Ok(_) => Err(CorpusError::Invalid(errors)),
        Err(CorpusError::Invalid(more)) => {
            // remap record positions to file lines
            errors.extend(more.into_iter().map(|e| LineError {
                line: lines[e.line - 1],
                message: e.message,
            }));
            errors.sort_by_key(|e| e.line);
            Err(CorpusError::Invalid(errors))
        }
        Err(CorpusError::Empty) if !errors.is_empty() => Err(CorpusError::Invalid(errors)),
        Err(e) => Err(e),
    }
}

/// Parse a JSONL corpus file.
pub fn parse_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus_str(&text)
}

/// Read a sidecar-score CSV: header row whose first column is `policy_id`,
/// one row per policy, numeric cells.
pub fn load_sidecar_scores(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>, CorpusError> {
    let fail = |message: String| CorpusError::Sidecar {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let header = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    if header.get(0) != Some("policy_id") {
        return Err(fail("first header column must be `policy_id`".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut out = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if record.len() != header.len() {
            return Err(fail(format!(
                "row {} has {} cells, expected {}",
                row + 1,
                record.len(),
                header.len()
            )));
        }
        let id = record[0].to_string();
        let mut cols = BTreeMap::new();
        for (name, cell) in names.iter().zip(record.iter().skip(1)) {
            let v: f64 = cell
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| fail(format!("row {}: non-numeric cell {cell:?} in {name}", row + 1)))?;
            cols.insert(name.clone(), v);
        }
        if out.insert(id.clone(), cols).is_some() {
            return Err(fail(format!("duplicate policy_id {id:?}")));
        }
    }
    Ok(out)
}

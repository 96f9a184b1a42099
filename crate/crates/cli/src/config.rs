//! Run configuration.
//!
//! Configuration is a flat map of dotted keys. Values come from, in order of
//! increasing precedence: built-in defaults, a JSON config file, `--set
//! key=value` flags, and dedicated flags such as `--corpus` or `--seed`.
//! Nested JSON objects in the config file are flattened to dotted keys.
//! Relative paths in a config file are resolved against the file's directory.
//!
//! | key | default |
//! |-----|---------|
//! | `seed` | 42 |
//! | `corpus` | none |
//! | `sidecar_scores` | none |
//! | `embeddings.embedding_a`, `embeddings.embedding_b` | none |
//! | `lookups.voting_weights`, `lookups.seat_shares` | bundled tables |
//! | `split.ratio` | 0.2 |
//! | `split.seed` | `seed` |
//! | `split.stratified` | true |
//! | `features.min_df` | 2 |
//! | `features.max_features` | none |
//! | `grid.representations` | `tfidf` |
//! | `grid.models` | all four kinds |
//! | `model.<kind>.<hyperparameter>` | model defaults |
//! | `explain.representation` | `tfidf` |
//! | `explain.importance_model` | `bayesian_ridge` |
//! | `explain.shap_model` | `gbdt` |
//! | `explain.repeats` | 10 |
//! | `explain.background` | 100 |
//! | `explain.samples` | 1000 |
//! | `explain.top_k` | 20 |
//! | `output` | `$POLPROG_OUT`, else `runs` |
//! | `jobs` | all cores |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use polprog_core::eval::Representation;
use polprog_core::ModelKind;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUTPUT_ENV: &str = "POLPROG_OUT";

const PATH_KEYS: [&str; 7] = [
    "corpus",
    "sidecar_scores",
    "embeddings.embedding_a",
    "embeddings.embedding_b",
    "lookups.voting_weights",
    "lookups.seat_shares",
    "output",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainSettings {
    pub representation: Representation,
    pub importance_model: ModelKind,
    pub shap_model: ModelKind,
    pub repeats: usize,
    pub background: usize,
    pub samples: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    pub sidecar_scores: Option<PathBuf>,
    pub embeddings: BTreeMap<Representation, PathBuf>,
    pub voting_weights: Option<PathBuf>,
    pub seat_shares: Option<PathBuf>,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub stratified: bool,
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub representations: Vec<Representation>,
    pub models: Vec<ModelKind>,
    pub hyperparameters: BTreeMap<ModelKind, BTreeMap<String, f64>>,
    pub explain: ExplainSettings,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

/// Flat key → value layers, merged lowest precedence first.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayers {
    values: BTreeMap<String, Value>,
}

impl ConfigLayers {
    pub fn new() -> Self {
        ConfigLayers::default()
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    /// Merge a JSON config file.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let json: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        let Value::Object(map) = json else {
            return Err(CliError::Validation(format!(
                "config {} must be a JSON object",
                path.display()
            )));
        };
        let mut flat = BTreeMap::new();
        flatten("", &Value::Object(map), &mut flat);
        let base = path.parent().unwrap_or(Path::new(""));
        for (key, mut value) in flat {
            if PATH_KEYS.contains(&key.as_str()) {
                if let Value::String(s) = &value {
                    let p = Path::new(s);
                    if p.is_relative() {
                        value = Value::String(base.join(p).display().to_string());
                    }
                }
            }
            self.values.insert(key, value);
        }
        Ok(())
    }

    /// Apply one `key=value` override. The value is read as JSON when it
    /// parses, otherwise as a string.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), value);
        Ok(())
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        Resolver { values: &self.values }.run()
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

struct Resolver<'a> {
    values: &'a BTreeMap<String, Value>,
}

fn bad(key: &str, expected: &str, got: &Value) -> CliError {
    CliError::Validation(format!("config key {key:?}: expected {expected}, got {got}"))
}

impl Resolver<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key).filter(|v| !v.is_null())
    }

    fn uint(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Number(n)) => n
                .as_u64()
                .ok_or_else(|| bad(key, "a non-negative integer", &Value::Number(n.clone()))),
            Some(Value::String(s)) => s
                .parse()
                .map_err(|_| bad(key, "a non-negative integer", &Value::String(s.clone()))),
            Some(v) => Err(bad(key, "a non-negative integer", v)),
        }
    }

    fn float(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Number(n)) => n
                .as_f64()
                .ok_or_else(|| bad(key, "a number", &Value::Number(n.clone()))),
            Some(Value::String(s)) => s.parse().map_err(|_| bad(key, "a number", &Value::String(s.clone()))),
            Some(v) => Err(bad(key, "a number", v)),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(Value::String(s)) if s == "true" || s == "false" => Ok(s == "true"),
            Some(v) => Err(bad(key, "true or false", v)),
        }
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(PathBuf::from(s))),
            Some(v) => Err(bad(key, "a path", v)),
        }
    }

    fn text(&self, key: &str, default: &str) -> Result<String, CliError> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(bad(key, "a string", v)),
        }
    }

    /// Comma-separated string or JSON array of strings.
    fn list<T: std::str::FromStr<Err = String>>(&self, key: &str, default: &str) -> Result<Vec<T>, CliError> {
        let items: Vec<String> = match self.get(key) {
            None => default.split(',').map(str::to_string).collect(),
            Some(Value::String(s)) => s.split(',').map(|p| p.trim().to_string()).collect(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| bad(key, "a list of names", v))
                })
                .collect::<Result<_, _>>()?,
            Some(v) => return Err(bad(key, "a list of names", v)),
        };
        let mut out: Vec<T> = Vec::new();
        for item in items.iter().filter(|s| !s.is_empty()) {
            out.push(
                item.parse()
                    .map_err(|e: String| CliError::Validation(format!("config key {key:?}: {e}")))?,
            );
        }
        if out.is_empty() {
            return Err(CliError::Validation(format!("config key {key:?} is empty")));
        }
        Ok(out)
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, key: &str, default: &str) -> Result<T, CliError> {
        self.text(key, default)?
            .parse()
            .map_err(|e: String| CliError::Validation(format!("config key {key:?}: {e}")))
    }

    fn run(&self) -> Result<RunConfig, CliError> {
        const KNOWN: [&str; 22] = [
            "seed",
            "corpus",
            "sidecar_scores",
            "embeddings.embedding_a",
            "embeddings.embedding_b",
            "lookups.voting_weights",
            "lookups.seat_shares",
            "split.ratio",
            "split.seed",
            "split.stratified",
            "features.min_df",
            "features.max_features",
            "grid.representations",
            "grid.models",
            "explain.representation",
            "explain.importance_model",
            "explain.shap_model",
            "explain.repeats",
            "explain.background",
            "explain.samples",
            "explain.top_k",
            "output",
        ];
        let mut hyperparameters: BTreeMap<ModelKind, BTreeMap<String, f64>> = BTreeMap::new();
        for key in self.values.keys() {
            if KNOWN.contains(&key.as_str()) || key == "jobs" {
                continue;
            }
            let parts: Vec<&str> = key.split('.').collect();
            if let ["model", kind, name] = parts.as_slice() {
                let kind: ModelKind = kind
                    .parse()
                    .map_err(|e: String| CliError::Validation(format!("config key {key:?}: {e}")))?;
                if !kind.defaults().iter().any(|(n, _)| n == name) {
                    let names: Vec<&str> = kind.defaults().iter().map(|(n, _)| *n).collect();
                    return Err(CliError::Validation(format!(
                        "config key {key:?}: {kind} has no hyperparameter {name:?} (known: {})",
                        names.join(", ")
                    )));
                }
                let value = self.float(key, f64::NAN)?;
                hyperparameters.entry(kind).or_default().insert(name.to_string(), value);
                continue;
            }
            return Err(CliError::Validation(format!("unknown config key {key:?}")));
        }

        let seed = self.uint("seed", 42)?;
        let split_ratio = self.float("split.ratio", 0.2)?;
        if !(split_ratio > 0.0 && split_ratio < 1.0) {
            return Err(CliError::Validation(format!(
                "config key \"split.ratio\" must lie in (0, 1), got {split_ratio}"
            )));
        }
        let mut embeddings = BTreeMap::new();
        for rep in [Representation::EmbeddingA, Representation::EmbeddingB] {
            if let Some(p) = self.path(&format!("embeddings.{}", rep.as_str()))? {
                embeddings.insert(rep, p);
            }
        }
        let max_features = match self.get("features.max_features") {
            None => None,
            Some(_) => Some(self.uint("features.max_features", 0)? as usize),
        };
        let output = match self.path("output")? {
            Some(p) => p,
            None => std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from),
        };
        let jobs = match self.get("jobs") {
            None => None,
            Some(_) => match self.uint("jobs", 0)? {
                0 => return Err(CliError::Validation("jobs must be at least 1".into())),
                n => Some(n as usize),
            },
        };
        let explain = ExplainSettings {
            representation: self.parsed("explain.representation", "tfidf")?,
            importance_model: self.parsed("explain.importance_model", "bayesian_ridge")?,
            shap_model: self.parsed("explain.shap_model", "gbdt")?,
            repeats: positive(self.uint("explain.repeats", 10)?, "explain.repeats")?,
            background: positive(self.uint("explain.background", 100)?, "explain.background")?,
            samples: positive(self.uint("explain.samples", 1000)?, "explain.samples")?,
            top_k: positive(self.uint("explain.top_k", 20)?, "explain.top_k")?,
        };
        Ok(RunConfig {
            seed,
            corpus: self.path("corpus")?,
            sidecar_scores: self.path("sidecar_scores")?,
            embeddings,
            voting_weights: self.path("lookups.voting_weights")?,
            seat_shares: self.path("lookups.seat_shares")?,
            split_ratio,
            split_seed: self.uint("split.seed", seed)?,
            stratified: self.boolean("split.stratified", true)?,
            min_df: positive(self.uint("features.min_df", 2)?, "features.min_df")?,
            max_features,
            representations: self.list("grid.representations", "tfidf")?,
            models: self.list("grid.models", "bayesian_ridge,random_forest,gbdt,svr")?,
            hyperparameters,
            explain,
            output,
            jobs,
        })
    }
}

fn positive(v: u64, key: &str) -> Result<usize, CliError> {
    if v == 0 {
        Err(CliError::Validation(format!("config key {key:?} must be at least 1")))
    } else {
        Ok(v as usize)
    }
}

impl RunConfig {
    /// Canonical JSON of every setting that can change results (output root
    /// and thread count excluded).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

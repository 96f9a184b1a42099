use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{prepare, FeatureConfig, PreparedData, Representation};
use super::{metrics, snapped_accuracy, EvalError, Metrics};
use crate::corpus::{split, Corpus};
use crate::features::EmbeddingTable;
use crate::models::{fit, ModelKind, RegressorSpec};
use crate::seed;

pub const CSV_HEADER: &str = "representation,model,with_metadata,rmse,r2,n,seed,stage_accuracy";

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub representations: Vec<Representation>,
    pub kinds: Vec<ModelKind>,
    /// Per-kind hyperparameter overrides.
    pub hyperparameters: BTreeMap<ModelKind, BTreeMap<String, f64>>,
    pub seed: u64,
    pub split_seed: u64,
    pub ratio: f64,
    pub stratified: bool,
    pub features: FeatureConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            representations: vec![Representation::Tfidf],
            kinds: ModelKind::ALL.to_vec(),
            hyperparameters: BTreeMap::new(),
            seed: 42,
            split_seed: 42,
            ratio: 0.2,
            stratified: true,
            features: FeatureConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self, kind: ModelKind, seed: u64) -> RegressorSpec {
        RegressorSpec {
            kind,
            hyperparameters: self.hyperparameters.get(&kind).cloned().unwrap_or_default(),
            seed,
        }
    }

    /// Model seed of one grid cell; refitting a cell elsewhere (for
    /// explanations) with this seed reproduces the grid's model.
    pub fn cell_seed(&self, rep: Representation, kind: ModelKind, with_metadata: bool) -> u64 {
        seed::derive_str(self.seed, &cell_key(rep, kind, with_metadata))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub representation: Representation,
    pub model: ModelKind,
    pub with_metadata: bool,
    pub metrics: Metrics,
    pub seed: u64,
    /// Share of test predictions snapped onto the right stage; not part of the
    /// CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapped_accuracy: Option<f64>,
}

impl GridRow {
    pub fn cell_key(&self) -> String {
        cell_key(self.representation, self.model, self.with_metadata)
    }
}

fn cell_key(rep: Representation, kind: ModelKind, with_metadata: bool) -> String {
    format!("{}/{}/{}", rep, kind, if with_metadata { "meta" } else { "text" })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

impl GridResult {
    /// Rows in grid order (representation, model, metadata flag). An unknown
    /// stage accuracy is written as an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.representation,
                r.model,
                r.with_metadata,
                r.metrics.rmse,
                r.metrics.r2,
                r.metrics.n,
                r.seed,
                r.snapped_accuracy.map_or(String::new(), |a| a.to_string())
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridResult, EvalError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| EvalError::Csv(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
            return Err(EvalError::Csv(format!("expected header {CSV_HEADER:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
            let bad = |what: &str| EvalError::Csv(format!("row {}: bad {what}", i + 1));
            rows.push(GridRow {
                representation: rec[0].parse().map_err(|_| bad("representation"))?,
                model: rec[1].parse().map_err(|_| bad("model"))?,
                with_metadata: rec[2].parse().map_err(|_| bad("with_metadata"))?,
                metrics: Metrics {
                    rmse: rec[3].parse().map_err(|_| bad("rmse"))?,
                    r2: rec[4].parse().map_err(|_| bad("r2"))?,
                    n: rec[5].parse().map_err(|_| bad("n"))?,
                },
                seed: rec[6].parse().map_err(|_| bad("seed"))?,
                snapped_accuracy: match &rec[7] {
                    "" => None,
                    v => Some(v.parse().map_err(|_| bad("stage_accuracy"))?),
                },
            });
        }
        Ok(GridResult { rows })
    }

    /// Lowest-RMSE row among those with the given metadata flag.
    pub fn best(&self, with_metadata: bool) -> Option<&GridRow> {
        self.rows
            .iter()
            .filter(|r| r.with_metadata == with_metadata)
            .min_by(|a, b| a.metrics.rmse.total_cmp(&b.metrics.rmse))
    }
}

/// Fit and score every cell on an already prepared split.
pub fn run_prepared(data: &PreparedData, config: &GridConfig) -> Result<GridResult, EvalError> {
    for &rep in &config.representations {
        if !data.representations().any(|r| r == rep) {
            return Err(EvalError::MissingEmbedding(rep));
        }
    }
    let mut cells = Vec::new();
    for &rep in &config.representations {
        for &kind in &config.kinds {
            for with_metadata in [true, false] {
                cells.push((rep, kind, with_metadata));
            }
        }
    }
    let rows: Vec<Result<GridRow, EvalError>> = cells
        .par_iter()
        .map(|&(rep, kind, with_metadata)| {
            let key = cell_key(rep, kind, with_metadata);
            let cell_seed = config.cell_seed(rep, kind, with_metadata);
            let (train, test) = data.design(rep, with_metadata)?;
            let model =
                fit(&config.spec(kind, cell_seed), &train, &data.y_train).map_err(|source| EvalError::Model {
                    cell: key.clone(),
                    source,
                })?;
            let pred = model.predict(&test).map_err(|source| EvalError::Model {
                cell: key.clone(),
                source,
            })?;
            Ok(GridRow {
                representation: rep,
                model: kind,
                with_metadata,
                metrics: metrics(&data.y_test, &pred)?,
                seed: cell_seed,
                snapped_accuracy: Some(snapped_accuracy(&data.y_test, &pred)?),
            })
        })
        .collect();
    Ok(GridResult {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Split once, featurize once, then evaluate every
/// representation × model × metadata cell on the shared split.
pub fn run_grid(
    corpus: &Corpus,
    config: &GridConfig,
    embeddings: &BTreeMap<Representation, EmbeddingTable>,
) -> Result<GridResult, EvalError> {
    for &rep in &config.representations {
        if rep != Representation::Tfidf && !embeddings.contains_key(&rep) {
            return Err(EvalError::MissingEmbedding(rep));
        }
    }
    let split = split(corpus, config.ratio, config.split_seed, config.stratified)?;
    let data = prepare(corpus, &split, &config.features, embeddings)?;
    run_prepared(&data, config)
}

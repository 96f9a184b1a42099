//! Regressors behind one fit/predict contract.
//!
//! | kind             | hyperparameter      | default | meaning                                   |
//! |------------------|---------------------|---------|-------------------------------------------|
//! | `bayesian_ridge` | `max_iter`          | 300     | evidence-maximization iterations          |
//! |                  | `tol`               | 1e-3    | relative change of α and λ to stop        |
//! |                  | `alpha_1` … `lambda_2` | 1e-6 | Gamma hyperpriors on α and λ              |
//! |                  | `fit_intercept`     | 1       | centre X and y                            |
//! | `random_forest`  | `n_trees`           | 100     |                                           |
//! |                  | `max_features`      | 0       | features per split; 0 means ⌈p/3⌉         |
//! |                  | `max_depth`         | 0       | 0 means unlimited                         |
//! |                  | `min_samples_leaf`  | 1       |                                           |
//! | `gbdt`           | `n_rounds`          | 500     |                                           |
//! |                  | `max_depth`         | 6       |                                           |
//! |                  | `learning_rate`     | 0.03    | in (0, 1]                                 |
//! |                  | `min_samples_leaf`  | 1       |                                           |
//! | `svr`            | `c`                 | 1.0     | box constraint                            |
//! |                  | `epsilon`           | 0.1     | tube half-width                           |
//! |                  | `gamma`             | 0       | RBF width; 0 means 1/(p·var(X))           |
//! |                  | `tol`               | 1e-3    | maximal KKT violation at termination      |
//! |                  | `max_iter`          | 1e7     | SMO iteration cap                         |
//! |                  | `standardize`       | 1       | z-score columns before the kernel         |
//!
//! Saved models are JSON documents:
//!
//! ```json
//! {"format": "polprog-model", "version": 1,
//!  "kind": "gbdt", "hyperparameters": {...}, "seed": 42,
//!  "column_names": [...], "internals": {"type": "gbdt", ...},
//!  "training_log": [...]}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

mod forest;
mod gbdt;
mod ridge;
mod svr;
pub mod tree;

pub use forest::ForestInternals;
pub use gbdt::GbdtInternals;
pub use ridge::{posterior_mean, RidgeInternals};
pub use svr::SvrInternals;
pub use tree::{RegressionTree, TreeNode};

pub const MODEL_FORMAT: &str = "polprog-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BayesianRidge,
    RandomForest,
    Gbdt,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::BayesianRidge,
        ModelKind::RandomForest,
        ModelKind::Gbdt,
        ModelKind::Svr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BayesianRidge => "bayesian_ridge",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Svr => "svr",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::BayesianRidge => "Bayesian Ridge",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Gbdt => "Gradient Boosting",
            ModelKind::Svr => "SVR",
        }
    }

    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelKind::BayesianRidge => &[
                ("max_iter", 300.0),
                ("tol", 1e-3),
                ("alpha_1", 1e-6),
                ("alpha_2", 1e-6),
                ("lambda_1", 1e-6),
                ("lambda_2", 1e-6),
                ("fit_intercept", 1.0),
            ],
            ModelKind::RandomForest => &[
                ("n_trees", 100.0),
                ("max_features", 0.0),
                ("max_depth", 0.0),
                ("min_samples_leaf", 1.0),
            ],
            ModelKind::Gbdt => &[
                ("n_rounds", 500.0),
                ("max_depth", 6.0),
                ("learning_rate", 0.03),
                ("min_samples_leaf", 1.0),
            ],
            ModelKind::Svr => &[
                ("c", 1.0),
                ("epsilon", 0.1),
                ("gamma", 0.0),
                ("tol", 1e-3),
                ("max_iter", 1e7),
                ("standardize", 1.0),
            ],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            format!("unknown model kind {s:?} (expected one of bayesian_ridge, random_forest, gbdt, svr)")
        })
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("{kind}: unknown hyperparameter {name:?}")]
    UnknownHyperparameter { kind: ModelKind, name: String },
    #[error("{kind}: invalid {name} = {value}: {rule}")]
    InvalidHyperparameter {
        kind: ModelKind,
        name: String,
        value: f64,
        rule: &'static str,
    },
    #[error("need at least 2 rows with matching targets, got {rows} rows and {targets} targets")]
    Shape { rows: usize, targets: usize },
    #[error("non-finite target at row {0}")]
    NonFiniteTarget(usize),
    #[error("column mismatch at position {position}: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("SMO did not converge in {iterations} iterations (final KKT violation {violation:e})")]
    NotConverged { iterations: u64, violation: f64 },
    #[error("model document: {0}")]
    Format(String),
}

/// Model family plus hyperparameter overrides; missing names take the
/// defaults listed in the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(kind: ModelKind) -> Self {
        RegressorSpec {
            kind,
            hyperparameters: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Defaults merged with overrides, validated.
    pub fn resolved(&self) -> Result<BTreeMap<String, f64>, ModelError> {
        let kind = self.kind;
        let mut params: BTreeMap<String, f64> = kind.defaults().iter().map(|&(k, v)| (k.to_string(), v)).collect();
        for (name, &value) in &self.hyperparameters {
            match params.get_mut(name) {
                Some(slot) => *slot = value,
                None => {
                    return Err(ModelError::UnknownHyperparameter {
                        kind,
                        name: name.clone(),
                    })
                }
            }
        }
        for (name, &value) in &params {
            if let Some(rule) = violated_rule(kind, name, value) {
                return Err(ModelError::InvalidHyperparameter {
                    kind,
                    name: name.clone(),
                    value,
                    rule,
                });
            }
        }
        Ok(params)
    }
}

fn violated_rule(kind: ModelKind, name: &str, v: f64) -> Option<&'static str> {
    let integer = v.fract() == 0.0;
    let rule = match (kind, name) {
        (_, "max_iter" | "n_trees" | "n_rounds" | "min_samples_leaf") => {
            (v >= 1.0 && integer).then_some(()).ok_or("must be an integer >= 1")
        }
        (ModelKind::Gbdt, "max_depth") => (v >= 1.0 && integer).then_some(()).ok_or("must be an integer >= 1"),
        (_, "max_depth" | "max_features") => (v >= 0.0 && integer)
            .then_some(())
            .ok_or("must be an integer >= 0 (0 = automatic)"),
        (_, "fit_intercept" | "standardize") => (v == 0.0 || v == 1.0).then_some(()).ok_or("must be 0 or 1"),
        (_, "learning_rate") => (v > 0.0 && v <= 1.0).then_some(()).ok_or("must lie in (0, 1]"),
        (_, "c" | "epsilon" | "tol") => (v > 0.0).then_some(()).ok_or("must be > 0"),
        (_, "gamma" | "alpha_1" | "alpha_2" | "lambda_1" | "lambda_2") => {
            (v >= 0.0).then_some(()).ok_or("must be >= 0")
        }
        _ => Ok(()),
    };
    if !v.is_finite() {
        return Some("must be finite");
    }
    rule.err()
}

/// Fitted parameters of each family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelInternals {
    BayesianRidge(RidgeInternals),
    RandomForest(ForestInternals),
    Gbdt(GbdtInternals),
    Svr(SvrInternals),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    kind: ModelKind,
    hyperparameters: BTreeMap<String, f64>,
    seed: u64,
    column_names: Vec<String>,
    internals: ModelInternals,
    training_log: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// Fit a regressor. Deterministic given the spec, the data and its row order.
pub fn fit(spec: &RegressorSpec, x: &FeatureMatrix, y: &[f64]) -> Result<TrainedModel, ModelError> {
    let params = spec.resolved()?;
    if x.n_rows() != y.len() || y.len() < 2 {
        return Err(ModelError::Shape {
            rows: x.n_rows(),
            targets: y.len(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTarget(i));
    }
    let xv = x.values().view();
    let (internals, training_log) = match spec.kind {
        ModelKind::BayesianRidge => ridge::fit(xv, y, &params),
        ModelKind::RandomForest => forest::fit(xv, y, &params, spec.seed),
        ModelKind::Gbdt => gbdt::fit(xv, y, &params, spec.seed),
        ModelKind::Svr => svr::fit(xv, y, &params)?,
    };
    Ok(TrainedModel {
        kind: spec.kind,
        hyperparameters: params,
        seed: spec.seed,
        column_names: x.column_names(),
        internals,
        training_log,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hyperparameters(&self) -> &BTreeMap<String, f64> {
        &self.hyperparameters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn internals(&self) -> &ModelInternals {
        &self.internals
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    /// GBDT: training RMSE after each round. SVR: dual objective per sweep.
    /// Ridge: log marginal likelihood per iteration. Forest: training RMSE.
    pub fn training_curve(&self) -> &[f64] {
        &self.training_log
    }

    /// Raw predictions; the matrix columns must equal the training columns.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.check_columns(x)?;
        Ok(self.predict_array(x.values().view()))
    }

    pub fn check_columns(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        let found = x.columns();
        let n = self.column_names.len().max(found.len());
        for position in 0..n {
            let expected = self.column_names.get(position);
            let got = found.get(position).map(|c| &c.name);
            if expected != got {
                return Err(ModelError::ColumnMismatch {
                    position,
                    expected: expected.cloned().unwrap_or_else(|| "<none>".into()),
                    found: got.cloned().unwrap_or_else(|| "<none>".into()),
                });
            }
        }
        Ok(())
    }

    /// Predictions for a bare matrix whose columns are already known to be in
    /// training order.
    pub fn predict_array(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.column_names.len(), "column count");
        let x = x.as_standard_layout();
        x.rows()
            .into_iter()
            .map(|r| self.predict_row(r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.internals {
            ModelInternals::BayesianRidge(m) => m.predict_row(row),
            ModelInternals::RandomForest(m) => m.predict_row(row),
            ModelInternals::Gbdt(m) => m.predict_row(row),
            ModelInternals::Svr(m) => m.predict_row(row),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!("unexpected format {:?}", doc.format)));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported version {}", doc.version)));
        }
        let m = doc.model;
        let kind_matches = matches!(
            (&m.internals, m.kind),
            (ModelInternals::BayesianRidge(_), ModelKind::BayesianRidge)
                | (ModelInternals::RandomForest(_), ModelKind::RandomForest)
                | (ModelInternals::Gbdt(_), ModelKind::Gbdt)
                | (ModelInternals::Svr(_), ModelKind::Svr)
        );
        if !kind_matches {
            return Err(ModelError::Format("internals do not match kind".into()));
        }
        Ok(m)
    }
}

pub(crate) fn training_rmse(pred: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / y.len() as f64).sqrt()
}

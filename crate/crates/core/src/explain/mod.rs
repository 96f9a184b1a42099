//! Feature attributions: permutation importance and Shapley values.
//!
//! Shapley values here are interventional: a feature outside the coalition
//! takes its value from a background row, and the value function averages the
//! model output over the background.

mod permutation;
mod shap;

pub use permutation::{
    permutation_importance, permutation_importance_grouped, ImportanceEntry, ImportanceReport, IMPORTANCE_CSV_HEADER,
};
pub use shap::{
    sample_background, shap, shap_bruteforce, ShapMatrix, ShapMethod, ShapOptions, BRUTEFORCE_MAX_FEATURES,
    EMBEDDING_GROUP_NAME, SHAP_CSV_HEADER,
};

use crate::models::{ModelError, ModelKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("Monte-Carlo sample count must be at least 1")]
    ZeroSamples,
    #[error("background set is empty")]
    EmptyBackground,
    #[error("{method} cannot explain a {kind} model")]
    MethodMismatch { method: ShapMethod, kind: ModelKind },
    #[error("brute-force Shapley enumerates 2^d coalitions; d = {d} exceeds {max}")]
    TooManyFeatures { d: usize, max: usize },
    #[error("row has {got} values, model expects {expected}")]
    RowLength { got: usize, expected: usize },
    #[error("feature group {0:?} is empty or names an unknown column")]
    BadGroup(String),
    #[error("CSV: {0}")]
    Csv(String),
}

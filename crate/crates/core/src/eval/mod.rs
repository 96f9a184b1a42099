//! Metrics, category snapping and the representation × model benchmark grid.

mod grid;
mod pipeline;

pub use grid::{run_grid, run_prepared, GridConfig, GridResult, GridRow, CSV_HEADER};
pub use pipeline::{clean_docs, prepare, FeatureConfig, PreparedData, Representation};

use serde::{Deserialize, Serialize};

use crate::corpus::StageLabel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {y} targets vs {yhat} predictions")]
    LengthMismatch { y: usize, yhat: usize },
    #[error("empty input")]
    Empty,
    #[error("R² needs at least 2 targets")]
    TooFew,
    #[error("R² is undefined for constant targets")]
    ConstantTarget,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("representation {0} needs an embedding sidecar; none was supplied")]
    MissingEmbedding(Representation),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Split(#[from] crate::corpus::SplitError),
    #[error("cell {cell}: {source}")]
    Model {
        cell: String,
        source: crate::models::ModelError,
    },
    #[error("grid CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub r2: f64,
    pub n: usize,
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch {
            y: y.len(),
            yhat: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&v) = y.iter().chain(yhat).find(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(v));
    }
    Ok(())
}

/// `sqrt(mean((y − ŷ)²))`.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `1 − Σ(y − ŷ)² / Σ(y − ȳ)²`; constant targets are an error.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, yhat)?;
    if y.len() < 2 {
        return Err(EvalError::TooFew);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(EvalError::ConstantTarget);
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}

pub fn metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics, EvalError> {
    Ok(Metrics {
        rmse: rmse(y, yhat)?,
        r2: r2(y, yhat)?,
        n: y.len(),
    })
}

/// Clamp to [0, 1] and round to the nearest stage value; exact midpoints go
/// to the lower stage. 0 maps to [`StageLabel::Blocked`], whose display form
/// is [`snapped_name`]'s "Blocked/Withdrawn".
pub fn snap_to_category(yhat: f64) -> Result<StageLabel, EvalError> {
    if !yhat.is_finite() {
        return Err(EvalError::NonFinite(yhat));
    }
    let v = yhat.clamp(0.0, 1.0);
    // quarter steps: ceil(4v − 0.5) sends exact .125 midpoints down
    let step = ((4.0 * v - 0.5).ceil() as i64).clamp(0, 4);
    Ok(match step {
        0 => StageLabel::Blocked,
        1 => StageLabel::Announced,
        2 => StageLabel::Tabled,
        3 => StageLabel::CloseToAdoption,
        _ => StageLabel::AdoptedCompleted,
    })
}

/// Report name of a snapped category; the shared 0 level reads
/// "Blocked/Withdrawn".
pub fn snapped_name(label: StageLabel) -> &'static str {
    match label {
        StageLabel::Blocked | StageLabel::Withdrawn => "Blocked/Withdrawn",
        other => other.canonical(),
    }
}

/// Share of predictions whose snapped category has the target's value.
pub fn snapped_accuracy(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, yhat)?;
    let mut hits = 0usize;
    for (t, p) in y.iter().zip(yhat) {
        if snap_to_category(*p)?.value() == *t {
            hits += 1;
        }
    }
    Ok(hits as f64 / y.len() as f64)
}

//! Policy-stage prediction from policy text and legislative metadata.
//!
//! The crate covers the whole modelling path:
//!
//! * [`corpus`]: policy records, stage labels and their ordinal target, splits,
//!   and a planted-signal synthetic corpus generator.
//! * [`textprep`]: cleaning, tokenization, stop-word removal and lemmatization.
//! * [`features`]: TF-IDF, dense embedding sidecars, metadata encodings and
//!   aligned feature matrices.
//! * [`models`]: Bayesian ridge, random forest, gradient-boosted trees and
//!   epsilon-SVR behind one fit/predict contract.
//! * [`eval`]: RMSE / R², category snapping and the representation × model grid.
//! * [`explain`]: permutation importance and Shapley attributions.
//! * [`report`]: markdown/CSV tables and SVG charts.

pub mod corpus;
pub mod eval;
pub mod explain;
pub mod features;
pub mod models;
pub mod report;
pub mod seed;
pub mod textprep;

pub use corpus::{Corpus, PolicyRecord, Rapporteur, SplitIndices, StageLabel};
pub use eval::{GridResult, Metrics};
pub use explain::{ImportanceReport, ShapMatrix, ShapMethod};
pub use features::{Column, FeatureGroup, FeatureMatrix};
pub use models::{ModelKind, RegressorSpec, TrainedModel};

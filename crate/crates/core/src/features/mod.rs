//! Numeric representations: TF-IDF, embedding sidecars, metadata encodings,
//! and their assembly into aligned feature matrices.

mod embedding;
mod matrix;
pub mod metadata;
mod tfidf;

pub use embedding::{load_embeddings, parse_embeddings, EmbeddingTable};
pub use matrix::{assemble, Column, FeatureGroup, FeatureMatrix};
pub use metadata::{encode_metadata, fit_metadata_schema, MetadataLookups, MetadataSchema};
pub use tfidf::{fit_tfidf, transform_tfidf, TfidfModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("vocabulary is empty after filtering with min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
    #[error("missing row for policy id {0:?}")]
    MissingId(String),
    #[error("non-finite value {value} at row {row:?}, column {column:?}")]
    NonFinite { row: String, column: String, value: f64 },
    #[error("row order mismatch between blocks, first differing id {0:?}")]
    RowMismatch(String),
    #[error("no blocks to assemble")]
    NoBlocks,
    #[error("embedding file {file}: {message}")]
    Embedding { file: String, message: String },
    #[error("lookup table {file}: {message}")]
    Lookup { file: String, message: String },
}

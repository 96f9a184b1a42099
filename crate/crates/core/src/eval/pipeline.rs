use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{Corpus, PolicyRecord, SplitIndices};
use crate::features::{
    assemble, encode_metadata, fit_metadata_schema, fit_tfidf, transform_tfidf, EmbeddingTable, FeatureMatrix,
    MetadataLookups, MetadataSchema, TfidfModel,
};
use crate::textprep::{CleanDoc, Preprocessor};

/// Text representation of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Tfidf,
    EmbeddingA,
    EmbeddingB,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Tfidf,
        Representation::EmbeddingA,
        Representation::EmbeddingB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Tfidf => "tfidf",
            Representation::EmbeddingA => "embedding_a",
            Representation::EmbeddingB => "embedding_b",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Representation::Tfidf => "TF-IDF",
            Representation::EmbeddingA => "Embedding A",
            Representation::EmbeddingB => "Embedding B",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Representation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown representation {s:?} (expected tfidf, embedding_a or embedding_b)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub lookups: MetadataLookups,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            min_df: 2,
            max_features: None,
            lookups: MetadataLookups::default(),
        }
    }
}

/// Train/test blocks for every available representation, fitted on the
/// training side only.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: SplitIndices,
    pub y_train: Vec<f64>,
    pub y_test: Vec<f64>,
    pub tfidf: TfidfModel,
    pub schema: MetadataSchema,
    /// Lookup misses reported while fitting the metadata schema.
    pub warnings: Vec<String>,
    text: BTreeMap<Representation, (FeatureMatrix, FeatureMatrix)>,
    meta: (FeatureMatrix, FeatureMatrix),
}

/// Cleaned title and body.
pub fn clean_docs(pre: &Preprocessor, records: &[&PolicyRecord]) -> Vec<CleanDoc> {
    records
        .iter()
        .map(|r| pre.clean_doc(&r.id, &format!("{}\n{}", r.title, r.body)))
        .collect()
}

pub fn prepare(
    corpus: &Corpus,
    split: &SplitIndices,
    config: &FeatureConfig,
    embeddings: &BTreeMap<Representation, EmbeddingTable>,
) -> Result<PreparedData, EvalError> {
    let train = corpus.select(&split.train_ids);
    let test = corpus.select(&split.test_ids);
    let pre = Preprocessor::default();
    let train_docs = clean_docs(&pre, &train);
    let test_docs = clean_docs(&pre, &test);
    let tfidf = fit_tfidf(&train_docs, config.min_df, config.max_features)?;
    let mut text = BTreeMap::new();
    text.insert(
        Representation::Tfidf,
        (
            transform_tfidf(&tfidf, &train_docs)?,
            transform_tfidf(&tfidf, &test_docs)?,
        ),
    );
    for (&rep, table) in embeddings {
        if rep == Representation::Tfidf {
            continue;
        }
        text.insert(
            rep,
            (table.to_matrix(&split.train_ids)?, table.to_matrix(&split.test_ids)?),
        );
    }
    let (schema, warnings) = fit_metadata_schema(&train, &config.lookups)?;
    let meta = (encode_metadata(&train, &schema)?, encode_metadata(&test, &schema)?);
    Ok(PreparedData {
        split: split.clone(),
        y_train: train.iter().map(|r| r.target()).collect(),
        y_test: test.iter().map(|r| r.target()).collect(),
        tfidf,
        schema,
        warnings,
        text,
        meta,
    })
}

impl PreparedData {
    pub fn representations(&self) -> impl Iterator<Item = Representation> + '_ {
        self.text.keys().copied()
    }

    /// Train and test design matrices for one cell.
    pub fn design(
        &self,
        rep: Representation,
        with_metadata: bool,
    ) -> Result<(FeatureMatrix, FeatureMatrix), EvalError> {
        let (tr, te) = self.text.get(&rep).ok_or(EvalError::MissingEmbedding(rep))?;
        if with_metadata {
            Ok((
                assemble(&[tr.clone(), self.meta.0.clone()])?,
                assemble(&[te.clone(), self.meta.1.clone()])?,
            ))
        } else {
            Ok((tr.clone(), te.clone()))
        }
    }

    pub fn metadata(&self) -> (&FeatureMatrix, &FeatureMatrix) {
        (&self.meta.0, &self.meta.1)
    }
}

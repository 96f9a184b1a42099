use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Column, FeatureError, FeatureGroup, FeatureMatrix};
use crate::textprep::CleanDoc;

/// Vocabulary and document frequencies learned from training documents.
///
/// Columns are numbered in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    min_df: usize,
    max_features: Option<usize>,
}

impl TfidfModel {
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Document frequency per column.
    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn max_features(&self) -> Option<usize> {
        self.max_features
    }

    pub fn len(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_freq.is_empty()
    }

    /// Smoothed inverse document frequency, `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, column: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[column] as f64)).ln() + 1.0
    }
}

/// Learn the vocabulary: tokens with document frequency ≥ `min_df`, then the
/// `max_features` highest-df tokens (ties broken lexicographically).
pub fn fit_tfidf(
    train_docs: &[CleanDoc],
    min_df: usize,
    max_features: Option<usize>,
) -> Result<TfidfModel, FeatureError> {
    if train_docs.is_empty() {
        return Err(FeatureError::EmptyInput("TF-IDF training documents"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in train_docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for token in seen {
            *df.entry(token).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, c)| c >= min_df).collect();
    if let Some(limit) = max_features {
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        kept.truncate(limit);
        kept.sort_by(|a, b| a.0.cmp(b.0));
    }
    if kept.is_empty() {
        return Err(FeatureError::EmptyVocabulary { min_df });
    }
    Ok(TfidfModel {
        vocabulary: kept.iter().enumerate().map(|(i, (t, _))| (t.to_string(), i)).collect(),
        doc_freq: kept.iter().map(|&(_, c)| c).collect(),
        n_docs: train_docs.len(),
        min_df,
        max_features,
    })
}

/// Raw counts × smoothed idf, each non-zero row scaled to unit L2 norm.
/// Out-of-vocabulary tokens are ignored; rows without any in-vocabulary token
/// stay all-zero.
pub fn transform_tfidf(model: &TfidfModel, docs: &[CleanDoc]) -> Result<FeatureMatrix, FeatureError> {
    let v = model.len();
    let idf: Vec<f64> = (0..v).map(|j| model.idf(j)).collect();
    let mut values = Array2::<f64>::zeros((docs.len(), v));
    for (i, doc) in docs.iter().enumerate() {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in &doc.tokens {
            if let Some(&j) = model.vocabulary.get(t) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let mut row = values.row_mut(i);
        for (j, c) in counts {
            row[j] = c * idf[j];
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
    let mut columns = vec![Column::new(String::new(), FeatureGroup::Text); v];
    for (token, &j) in &model.vocabulary {
        columns[j] = Column::new(token.clone(), FeatureGroup::Text);
    }
    FeatureMatrix::new(docs.iter().map(|d| d.id.clone()).collect(), columns, values)
}

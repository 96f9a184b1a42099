//! Shared fixtures for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use polprog_core::corpus::{generate_synthetic, split};
use polprog_core::eval::{prepare, FeatureConfig, PreparedData, Representation};
use polprog_core::FeatureMatrix;

/// Prepared features for a planted-signal corpus of `n` policies.
pub fn prepared(n: usize) -> PreparedData {
    let corpus = generate_synthetic(7, n, 200).expect("synthetic corpus");
    let s = split(&corpus, 0.2, 42, true).expect("split");
    prepare(&corpus, &s, &FeatureConfig::default(), &BTreeMap::new()).expect("features")
}

/// TF-IDF plus metadata design matrices: (train, test).
pub fn design(data: &PreparedData) -> (FeatureMatrix, FeatureMatrix) {
    data.design(Representation::Tfidf, true).expect("design matrices")
}

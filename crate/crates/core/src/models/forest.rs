use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Presorted, RegressionTree, TreeParams};
use super::{training_rmse, ModelInternals};
use crate::seed;

/// Bagged regression trees; the prediction is the plain mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestInternals {
    pub trees: Vec<RegressionTree>,
}

impl ForestInternals {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub(super) fn fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &BTreeMap<String, f64>,
    seed: u64,
) -> (ModelInternals, Vec<f64>) {
    let (n, p) = x.dim();
    let n_trees = params["n_trees"] as usize;
    let mtry = match params["max_features"] as usize {
        0 => p.div_ceil(3).max(1),
        m => m.min(p),
    };
    let tree_params = TreeParams {
        max_depth: match params["max_depth"] as usize {
            0 => None,
            d => Some(d),
        },
        min_samples_leaf: params["min_samples_leaf"] as usize,
        max_features: Some(mtry),
    };
    let data = Presorted::new(x);
    // each tree owns a generator derived from (seed, tree index), so the
    // forest does not depend on scheduling
    let trees: Vec<RegressionTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[t as u64]));
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
            grow_tree(&data, y, &weights, &tree_params, &mut rng)
        })
        .collect();
    let model = ForestInternals { trees };
    let pred: Vec<f64> = x.rows().into_iter().map(|r| model.predict_row(&r.to_vec())).collect();
    let log = vec![training_rmse(&pred, y)];
    (ModelInternals::RandomForest(model), log)
}

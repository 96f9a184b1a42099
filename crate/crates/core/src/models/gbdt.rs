use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Presorted, RegressionTree, TreeParams};
use super::{training_rmse, ModelInternals};

/// Gradient-boosted trees for squared loss: `init + lr · Σ tree_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtInternals {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbdtInternals {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

/// Stagewise least squares: each round fits a depth-limited tree to the
/// current residuals and adds it with shrinkage. The log holds the training
/// RMSE after every round.
pub(super) fn fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &BTreeMap<String, f64>,
    seed: u64,
) -> (ModelInternals, Vec<f64>) {
    let n = y.len();
    let rounds = params["n_rounds"] as usize;
    let lr = params["learning_rate"];
    let tree_params = TreeParams {
        max_depth: Some(params["max_depth"] as usize),
        min_samples_leaf: params["min_samples_leaf"] as usize,
        max_features: None,
    };
    let data = Presorted::new(x);
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let init = y.iter().sum::<f64>() / n as f64;
    let weights = vec![1.0; n];
    // no feature subsampling, so the generator is never consumed; it is kept
    // for the shared grower signature
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![init; n];
    let mut trees = Vec::with_capacity(rounds);
    let mut log = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let resid: Vec<f64> = y.iter().zip(&f).map(|(t, p)| t - p).collect();
        let tree = grow_tree(&data, &resid, &weights, &tree_params, &mut rng);
        for (fi, row) in f.iter_mut().zip(&rows) {
            *fi += lr * tree.predict(row);
        }
        log.push(training_rmse(&f, y));
        trees.push(tree);
    }
    (
        ModelInternals::Gbdt(GbdtInternals {
            init,
            learning_rate: lr,
            trees,
        }),
        log,
    )
}

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::features::{Column, FeatureGroup, FeatureMatrix};
use crate::models::{ModelInternals, ModelKind, RegressionTree, TrainedModel, TreeNode};
use crate::seed;

pub const SHAP_CSV_HEADER: &str = "row_id,feature,group,shap,feature_value";
pub const BRUTEFORCE_MAX_FEATURES: usize = 12;
/// Name of the single column that replaces all embedding dimensions in
/// aggregated attributions.
pub const EMBEDDING_GROUP_NAME: &str = "text-embedding";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMethod {
    LinearExact,
    TreeExact,
    #[serde(rename = "montecarlo")]
    MonteCarlo,
}

impl ShapMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapMethod::LinearExact => "linear_exact",
            ShapMethod::TreeExact => "tree_exact",
            ShapMethod::MonteCarlo => "montecarlo",
        }
    }

    /// Method chosen when none is forced.
    pub fn auto(kind: ModelKind) -> ShapMethod {
        match kind {
            ModelKind::BayesianRidge => ShapMethod::LinearExact,
            ModelKind::RandomForest | ModelKind::Gbdt => ShapMethod::TreeExact,
            ModelKind::Svr => ShapMethod::MonteCarlo,
        }
    }
}

impl fmt::Display for ShapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear_exact" => Ok(ShapMethod::LinearExact),
            "tree_exact" => Ok(ShapMethod::TreeExact),
            "montecarlo" => Ok(ShapMethod::MonteCarlo),
            other => Err(format!(
                "unknown SHAP method {other:?} (expected linear_exact, tree_exact or montecarlo)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapOptions {
    /// `None` picks [`ShapMethod::auto`].
    pub method: Option<ShapMethod>,
    /// Permutations per row for Monte-Carlo.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ShapOptions {
    fn default() -> Self {
        ShapOptions {
            method: None,
            samples: 1000,
            seed: 42,
        }
    }
}

/// Per-row, per-feature attributions with `base_value + Σ_j values[i, j]`
/// equal to the prediction for row i.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<Column>,
    pub values: Array2<f64>,
    pub base_value: f64,
    pub method: ShapMethod,
    pub background_size: usize,
    pub seed: u64,
    /// Monte-Carlo only: permutations per row and standard errors.
    pub samples: Option<usize>,
    pub std_errors: Option<Array2<f64>>,
}

impl ShapMatrix {
    /// `base_value + Σ φ` for row `i`.
    pub fn reconstructed(&self, i: usize) -> f64 {
        self.base_value + self.values.row(i).sum()
    }

    /// Mean |φ| per column.
    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.values.nrows().max(1) as f64;
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n)
            .collect()
    }

    /// Sum all embedding columns into one [`EMBEDDING_GROUP_NAME`] column.
    /// Feature values of that column are 0, since a single value cannot
    /// summarize an embedding. Matrices without embedding columns come back
    /// unchanged.
    pub fn aggregate_embeddings(
        &self,
        feature_values: &FeatureMatrix,
    ) -> Result<(ShapMatrix, FeatureMatrix), ExplainError> {
        let emb: Vec<usize> = (0..self.columns.len())
            .filter(|&j| self.columns[j].group == FeatureGroup::Embedding)
            .collect();
        if emb.is_empty() {
            return Ok((self.clone(), feature_values.clone()));
        }
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&j| self.columns[j].group != FeatureGroup::Embedding)
            .collect();
        let n = self.values.nrows();
        let mut columns: Vec<Column> = keep.iter().map(|&j| self.columns[j].clone()).collect();
        columns.push(Column::new(EMBEDDING_GROUP_NAME, FeatureGroup::Embedding));
        let width = columns.len();
        let values = Array2::from_shape_fn((n, width), |(i, k)| match keep.get(k) {
            Some(&j) => self.values[[i, j]],
            None => emb.iter().map(|&j| self.values[[i, j]]).sum(),
        });
        let fv = Array2::from_shape_fn((n, width), |(i, k)| match keep.get(k) {
            Some(&j) => feature_values.get(i, j),
            None => 0.0,
        });
        let out = ShapMatrix {
            columns: columns.clone(),
            values,
            std_errors: None,
            ..self.clone()
        };
        Ok((out, FeatureMatrix::new(self.row_ids.clone(), columns, fv)?))
    }

    /// Long format, one line per (row, feature), rows then columns in order.
    pub fn to_csv(&self, feature_values: &FeatureMatrix) -> Result<String, ExplainError> {
        check_aligned(self, feature_values)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SHAP_CSV_HEADER.split(',')).expect("in-memory write");
        for (i, id) in self.row_ids.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                w.write_record([
                    id.clone(),
                    c.name.clone(),
                    c.group.as_str().to_string(),
                    self.values[[i, j]].to_string(),
                    feature_values.get(i, j).to_string(),
                ])
                .expect("in-memory write");
            }
        }
        Ok(String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"))
    }

    /// Parse [`ShapMatrix::to_csv`] output. Run metadata (base value, method,
    /// background size, seed) is supplied by the caller.
    pub fn from_csv(
        text: &str,
        base_value: f64,
        method: ShapMethod,
        background_size: usize,
        seed: u64,
    ) -> Result<(ShapMatrix, FeatureMatrix), ExplainError> {
        let bad = |m: String| ExplainError::Csv(m);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != SHAP_CSV_HEADER {
            return Err(bad(format!("expected header {SHAP_CSV_HEADER:?}")));
        }
        let mut row_ids: Vec<String> = Vec::new();
        let mut columns: Vec<Column> = Vec::new();
        let mut cells: Vec<(f64, f64)> = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if row_ids.last().map(String::as_str) != Some(&rec[0]) {
                row_ids.push(rec[0].to_string());
            }
            if row_ids.len() == 1 {
                let group: FeatureGroup = rec[2].parse().map_err(bad)?;
                columns.push(Column::new(&rec[1], group));
            }
            let k = cells.len() % columns.len().max(1);
            if columns.get(k).map(|c| c.name.as_str()) != Some(&rec[1]) {
                return Err(bad(format!("line {}: feature {:?} out of order", line + 2, &rec[1])));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number {s:?}", line + 2)))
            };
            cells.push((num(&rec[3])?, num(&rec[4])?));
        }
        let (n, d) = (row_ids.len(), columns.len());
        if cells.len() != n * d {
            return Err(bad(format!("{} cells for {n} rows × {d} features", cells.len())));
        }
        let values = Array2::from_shape_fn((n, d), |(i, j)| cells[i * d + j].0);
        let fv = Array2::from_shape_fn((n, d), |(i, j)| cells[i * d + j].1);
        let features = FeatureMatrix::new(row_ids.clone(), columns.clone(), fv)?;
        Ok((
            ShapMatrix {
                row_ids,
                columns,
                values,
                base_value,
                method,
                background_size,
                seed,
                samples: None,
                std_errors: None,
            },
            features,
        ))
    }
}

fn check_aligned(m: &ShapMatrix, fv: &FeatureMatrix) -> Result<(), ExplainError> {
    if fv.row_ids() != m.row_ids.as_slice() || fv.columns() != m.columns.as_slice() {
        return Err(ExplainError::Feature(crate::features::FeatureError::Shape(
            "feature values are not aligned with the attribution matrix".into(),
        )));
    }
    Ok(())
}

/// Up to `size` rows drawn without replacement (kept in original order);
/// all rows when the matrix is small enough.
pub fn sample_background(train: &FeatureMatrix, size: usize, seed: u64) -> Result<FeatureMatrix, ExplainError> {
    if train.n_rows() <= size {
        return Ok(train.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, train.n_rows(), size).into_vec();
    idx.sort_unstable();
    Ok(train.take_rows(&idx)?)
}

fn rows_of(x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Shapley attributions of `model` on the rows of `x` relative to
/// `background`.
pub fn shap(
    model: &TrainedModel,
    x: &FeatureMatrix,
    background: &FeatureMatrix,
    options: &ShapOptions,
) -> Result<ShapMatrix, ExplainError> {
    model.check_columns(x)?;
    model.check_columns(background)?;
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let method = options.method.unwrap_or_else(|| ShapMethod::auto(model.kind()));
    let rows = rows_of(x.values().view());
    let bg = rows_of(background.values().view());
    let d = x.n_cols();
    let bg_pred: Vec<f64> = bg.iter().map(|z| model.predict_row(z)).collect();
    let bg_mean = bg_pred.iter().sum::<f64>() / bg.len() as f64;

    let (phi, base_value, std_errors): (Vec<Vec<f64>>, f64, Option<Vec<Vec<f64>>>) = match method {
        ShapMethod::LinearExact => {
            let ModelInternals::BayesianRidge(r) = model.internals() else {
                return Err(ExplainError::MethodMismatch {
                    method,
                    kind: model.kind(),
                });
            };
            let mean: Vec<f64> = (0..d)
                .map(|j| bg.iter().map(|z| z[j]).sum::<f64>() / bg.len() as f64)
                .collect();
            let phi = rows
                .iter()
                .map(|x| (0..d).map(|j| r.coef[j] * (x[j] - mean[j])).collect())
                .collect();
            (phi, r.predict_row(&mean), None)
        }
        ShapMethod::TreeExact => {
            let (trees, weight): (&[RegressionTree], f64) = match model.internals() {
                ModelInternals::RandomForest(f) => (&f.trees, 1.0 / f.trees.len() as f64),
                ModelInternals::Gbdt(g) => (&g.trees, g.learning_rate),
                _ => {
                    return Err(ExplainError::MethodMismatch {
                        method,
                        kind: model.kind(),
                    })
                }
            };
            let phi = rows.par_iter().map(|x| tree_shap_row(trees, weight, x, &bg)).collect();
            (phi, bg_mean, None)
        }
        ShapMethod::MonteCarlo => {
            if options.samples == 0 {
                return Err(ExplainError::ZeroSamples);
            }
            let out: Vec<(Vec<f64>, Vec<f64>)> = rows
                .par_iter()
                .enumerate()
                .map(|(i, x)| {
                    let rng = ChaCha8Rng::seed_from_u64(seed::derive(options.seed, &[i as u64]));
                    monte_carlo_row(model, x, &bg, &bg_pred, options.samples, rng)
                })
                .collect();
            let (phi, se) = out.into_iter().unzip();
            (phi, bg_mean, Some(se))
        }
    };
    let n = x.n_rows();
    let to_array = |v: Vec<Vec<f64>>| Array2::from_shape_fn((n, d), |(i, j)| v[i][j]);
    Ok(ShapMatrix {
        row_ids: x.row_ids().to_vec(),
        columns: x.columns().to_vec(),
        values: to_array(phi),
        base_value,
        method,
        background_size: bg.len(),
        seed: options.seed,
        samples: (method == ShapMethod::MonteCarlo).then_some(options.samples),
        std_errors: std_errors.map(to_array),
    })
}

/// `C(n, k)` in floating point.
fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

struct Walk<'a> {
    nodes: &'a [TreeNode],
    x: &'a [f64],
    z: &'a [f64],
    weight: f64,
    /// 0 unseen, 1 follows x, 2 follows z.
    owner: Vec<u8>,
    from_x: Vec<usize>,
    from_z: Vec<usize>,
}

impl Walk<'_> {
    /// Interventional Shapley values of one tree for the pair (x, z).
    ///
    /// A leaf reached with feature set A taken from x and B taken from z is
    /// the output of exactly those coalitions S with A ⊆ S and S ∩ B = ∅.
    /// Summing the Shapley weights of such coalitions gives each i ∈ A the
    /// share `(|A|−1)!|B|!/(|A|+|B|)!` of the leaf value and each j ∈ B the
    /// negative share `|A|!(|B|−1)!/(|A|+|B|)!`.
    fn visit(&mut self, at: usize, phi: &mut [f64]) {
        match self.nodes[at] {
            TreeNode::Leaf { value } => {
                let (a, b) = (self.from_x.len(), self.from_z.len());
                let v = self.weight * value;
                if a > 0 {
                    let share = v / (a as f64 * binom(a + b, a));
                    for &i in &self.from_x {
                        phi[i] += share;
                    }
                }
                if b > 0 {
                    let share = v / (b as f64 * binom(a + b, b));
                    for &j in &self.from_z {
                        phi[j] -= share;
                    }
                }
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let xd = if self.x[feature] <= threshold { left } else { right };
                let zd = if self.z[feature] <= threshold { left } else { right };
                match self.owner[feature] {
                    1 => self.visit(xd, phi),
                    2 => self.visit(zd, phi),
                    _ if xd == zd => self.visit(xd, phi),
                    _ => {
                        self.owner[feature] = 1;
                        self.from_x.push(feature);
                        self.visit(xd, phi);
                        self.from_x.pop();
                        self.owner[feature] = 2;
                        self.from_z.push(feature);
                        self.visit(zd, phi);
                        self.from_z.pop();
                        self.owner[feature] = 0;
                    }
                }
            }
        }
    }
}

fn tree_shap_row(trees: &[RegressionTree], weight: f64, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    let d = x.len();
    let mut phi = vec![0.0; d];
    let mut owner = vec![0u8; d];
    for z in bg {
        for tree in trees {
            let mut walk = Walk {
                nodes: &tree.nodes,
                x,
                z,
                weight,
                owner: std::mem::take(&mut owner),
                from_x: Vec::new(),
                from_z: Vec::new(),
            };
            walk.visit(0, &mut phi);
            owner = walk.owner;
        }
    }
    let scale = 1.0 / bg.len() as f64;
    phi.iter_mut().for_each(|v| *v *= scale);
    phi
}

/// Permutation sampling: sample k pairs a random feature order with
/// background row `k mod |bg|` and walks from that row to x one feature at a
/// time. Features where x and the background row agree contribute exactly 0
/// and cost no model call. Returns (estimates, standard errors).
fn monte_carlo_row(
    model: &TrainedModel,
    x: &[f64],
    bg: &[Vec<f64>],
    bg_pred: &[f64],
    samples: usize,
    mut rng: ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let d = x.len();
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    let mut cur = vec![0.0; d];
    for k in 0..samples {
        let b = k % bg.len();
        cur.copy_from_slice(&bg[b]);
        let mut prev = bg_pred[b];
        order.shuffle(&mut rng);
        for &j in &order {
            if x[j] != cur[j] {
                cur[j] = x[j];
                let f = model.predict_row(&cur);
                let m = f - prev;
                sum[j] += m;
                sumsq[j] += m * m;
                prev = f;
            }
        }
    }
    let m = samples as f64;
    let est: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let se = (0..d)
        .map(|j| {
            if samples < 2 {
                return 0.0;
            }
            let var = ((sumsq[j] - m * est[j] * est[j]) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    (est, se)
}

/// Exact interventional Shapley values by enumerating all 2^d coalitions:
/// `v(S) = mean_z f(x_S, z_{S̄})`.
pub fn shap_bruteforce(model: &TrainedModel, x: &[f64], background: &FeatureMatrix) -> Result<Vec<f64>, ExplainError> {
    let d = model.n_features();
    if x.len() != d {
        return Err(ExplainError::RowLength {
            got: x.len(),
            expected: d,
        });
    }
    model.check_columns(background)?;
    if d > BRUTEFORCE_MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            d,
            max: BRUTEFORCE_MAX_FEATURES,
        });
    }
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let bg = rows_of(background.values().view());
    let value: Vec<f64> = (0..1usize << d)
        .map(|mask| {
            let total: f64 = bg
                .iter()
                .map(|z| {
                    let h: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { x[j] } else { z[j] }).collect();
                    model.predict_row(&h)
                })
                .sum();
            total / bg.len() as f64
        })
        .collect();
    // weight(s) = s! (d − s − 1)! / d!
    let weight = |s: usize| 1.0 / (d as f64 * binom(d - 1, s));
    Ok((0..d)
        .map(|i| {
            (0..1usize << d)
                .filter(|m| m >> i & 1 == 0)
                .map(|m| weight(m.count_ones() as usize) * (value[m | 1 << i] - value[m]))
                .sum()
        })
        .collect())
}

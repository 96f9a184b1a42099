//! Binary least-squares regression trees.
//!
//! Trees are grown level by level. Every feature column is sorted once per fit
//! ([`Presorted`]); at each level one pass over a column's sorted order
//! evaluates the candidate splits of all frontier nodes at once, so growing a
//! level costs `O(rows · features)`.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Features referenced by any split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        })
    }
}

/// Column-major copy of the training matrix with each column's row order
/// sorted by value (ties by row index).
#[derive(Debug, Clone)]
pub struct Presorted {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        let columns: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { columns, order }
    }

    pub fn n_rows(&self) -> usize {
        self.order.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features sampled per node; `None` considers all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeStats {
    w: f64,
    s: f64,
    ss: f64,
}

impl NodeStats {
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.s += w * t;
        self.ss += w * t * t;
    }

    fn sse(&self) -> f64 {
        (self.ss - self.s * self.s / self.w).max(0.0)
    }
}

struct Frontier {
    node: usize,
    depth: usize,
    stats: NodeStats,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Running {
    w: f64,
    s: f64,
    last: f64,
}

const INACTIVE: u32 = u32::MAX;

/// Split point strictly between two consecutive distinct values, falling back
/// to the lower value when the midpoint rounds onto the upper one.
fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// Grow one tree on `targets` with per-row `weights` (zero-weight rows are
/// ignored; integer weights act as bootstrap multiplicities).
pub fn grow_tree<R: Rng>(
    data: &Presorted,
    targets: &[f64],
    weights: &[f64],
    params: &TreeParams,
    rng: &mut R,
) -> RegressionTree {
    let n = data.n_rows();
    let p = data.n_features();
    let min_leaf = params.min_samples_leaf.max(1) as f64;

    let mut node_of = vec![INACTIVE; n];
    let mut root = NodeStats::default();
    for i in 0..n {
        if weights[i] > 0.0 {
            node_of[i] = 0;
            root.add(weights[i], targets[i]);
        }
    }
    if root.w == 0.0 {
        return RegressionTree::leaf(0.0);
    }

    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let mut frontier = vec![Frontier {
        node: 0,
        depth: 0,
        stats: root,
    }];

    while !frontier.is_empty() {
        let splittable: Vec<bool> = frontier
            .iter()
            .map(|f| {
                params.max_depth.is_none_or(|d| f.depth < d)
                    && f.stats.w >= 2.0 * min_leaf
                    && f.stats.sse() > 1e-12 * f.stats.ss.max(f64::MIN_POSITIVE)
            })
            .collect();

        // per-node feature masks
        let masks: Option<Vec<Vec<bool>>> = params.max_features.filter(|&m| m < p).map(|m| {
            frontier
                .iter()
                .zip(&splittable)
                .map(|(_, &ok)| {
                    let mut mask = vec![false; p];
                    if ok {
                        for j in sample(rng, p, m.max(1)) {
                            mask[j] = true;
                        }
                    }
                    mask
                })
                .collect()
        });

        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        if splittable.iter().any(|&s| s) {
            let mut running = vec![Running::default(); frontier.len()];
            for f in 0..p {
                let uses = |k: usize| splittable[k] && masks.as_ref().is_none_or(|m| m[k][f]);
                if !(0..frontier.len()).any(uses) {
                    continue;
                }
                running.iter_mut().for_each(|r| *r = Running::default());
                let col = &data.columns[f];
                for &i in &data.order[f] {
                    let i = i as usize;
                    let k = node_of[i];
                    if k == INACTIVE {
                        continue;
                    }
                    let k = k as usize;
                    if !uses(k) {
                        continue;
                    }
                    let x = col[i];
                    let r = &mut running[k];
                    let total = &frontier[k].stats;
                    if r.w >= min_leaf && x > r.last && total.w - r.w >= min_leaf {
                        let (wr, sr) = (total.w - r.w, total.s - r.s);
                        let gain = r.s * r.s / r.w + sr * sr / wr - total.s * total.s / total.w;
                        if best[k].is_none_or(|b| gain > b.gain) {
                            best[k] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: threshold_between(r.last, x),
                            });
                        }
                    }
                    r.w += weights[i];
                    r.s += weights[i] * targets[i];
                    r.last = x;
                }
            }
        }

        // materialize this level
        let mut child_of: Vec<Option<(usize, usize)>> = vec![None; frontier.len()];
        let mut next = Vec::new();
        for (k, f) in frontier.iter().enumerate() {
            let accepted = best[k].filter(|c| c.gain > 1e-12 * f.stats.ss.max(f64::MIN_POSITIVE));
            match accepted {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes[f.node] = TreeNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    child_of[k] = Some((next.len(), next.len() + 1));
                    for node in [left, left + 1] {
                        next.push(Frontier {
                            node,
                            depth: f.depth + 1,
                            stats: NodeStats::default(),
                        });
                    }
                }
                None => {
                    nodes[f.node] = TreeNode::Leaf {
                        value: f.stats.s / f.stats.w,
                    };
                }
            }
        }
        for i in 0..n {
            let k = node_of[i];
            if k == INACTIVE {
                continue;
            }
            match (child_of[k as usize], &nodes[frontier[k as usize].node]) {
                (Some((l, r)), TreeNode::Split { feature, threshold, .. }) => {
                    let c = if data.columns[*feature][i] <= *threshold { l } else { r };
                    next[c].stats.add(weights[i], targets[i]);
                    node_of[i] = c as u32;
                }
                _ => node_of[i] = INACTIVE,
            }
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

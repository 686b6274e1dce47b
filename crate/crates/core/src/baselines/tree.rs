//! CART-style regression tree with vector-valued leaves.
//!
//! Splits greedily minimize the summed squared deviation across all target
//! columns (equal weights). Candidate thresholds are midpoints between
//! consecutive distinct sorted feature values; ties resolve to the lowest
//! feature index, then the lowest threshold. Rows route left when
//! `x[feature] <= threshold`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        /// Per-target mean of the training rows that reached this leaf.
        prediction: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: Node,
    pub n_features: usize,
    pub n_targets: usize,
}

/// Fit a regression tree. The seed only matters when a feature subset is
/// sampled per split (random-forest members); a plain fit is deterministic
/// regardless.
pub fn tree_fit(
    features: &Matrix,
    targets: &Matrix,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeModel> {
    let mut rng = Rng::seed_from_u64(seed);
    fit_with_sampler(features, targets, config, &mut rng, None)
}

/// Shared entry point for plain trees and forest members. When
/// `features_per_split` is set, each split considers a seeded random subset
/// of that many features.
pub(crate) fn fit_with_sampler(
    features: &Matrix,
    targets: &Matrix,
    config: &TreeConfig,
    rng: &mut Rng,
    features_per_split: Option<usize>,
) -> Result<TreeModel> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    if targets.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "tree-fit targets".to_string(),
            expected: n,
            actual: targets.rows(),
        });
    }
    if config.min_samples_leaf == 0 {
        return Err(Error::invalid("min_samples_leaf must be >= 1"));
    }
    if let Some(k) = features_per_split {
        if k == 0 || k > features.cols() {
            return Err(Error::invalid(format!(
                "features_per_split must be in 1..={}, got {k}",
                features.cols()
            )));
        }
    }
    let rows: Vec<usize> = (0..n).collect();
    let root = build_node(features, targets, &rows, 0, config, rng, features_per_split);
    Ok(TreeModel {
        root,
        n_features: features.cols(),
        n_targets: targets.cols(),
    })
}

fn leaf_for(targets: &Matrix, rows: &[usize]) -> Node {
    let mut mean = vec![0.0; targets.cols()];
    for &r in rows {
        for (m, &y) in mean.iter_mut().zip(targets.row(r)) {
            *m += y;
        }
    }
    for m in &mut mean {
        *m /= rows.len() as f64;
    }
    Node::Leaf { prediction: mean }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    features: &Matrix,
    targets: &Matrix,
    rows: &[usize],
    depth: usize,
    config: &TreeConfig,
    rng: &mut Rng,
    features_per_split: Option<usize>,
) -> Node {
    if depth >= config.max_depth || rows.len() < 2 * config.min_samples_leaf {
        return leaf_for(targets, rows);
    }

    let candidate_features: Vec<usize> = match features_per_split {
        None => (0..features.cols()).collect(),
        Some(k) => {
            // Partial Fisher-Yates draw without replacement, then sorted so
            // the tie-break order stays by feature index.
            let mut pool: Vec<usize> = (0..features.cols()).collect();
            let mut chosen = Vec::with_capacity(k);
            for _ in 0..k {
                let pick = rng.below(pool.len());
                chosen.push(pool.swap_remove(pick));
            }
            chosen.sort_unstable();
            chosen
        }
    };

    let mut best: Option<BestSplit> = None;
    for &feature in &candidate_features {
        if let Some(split) = best_split_on_feature(features, targets, rows, feature, config) {
            let better = match &best {
                None => true,
                Some(current) => split.score < current.score,
            };
            if better {
                best = Some(split);
            }
        }
    }

    match best {
        None => leaf_for(targets, rows),
        Some(split) => Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(build_node(
                features,
                targets,
                &split.left,
                depth + 1,
                config,
                rng,
                features_per_split,
            )),
            right: Box::new(build_node(
                features,
                targets,
                &split.right,
                depth + 1,
                config,
                rng,
                features_per_split,
            )),
        },
    }
}

/// Scan one feature's midpoint candidates with prefix sums; score is the
/// summed per-target SSE of the two sides.
fn best_split_on_feature(
    features: &Matrix,
    targets: &Matrix,
    rows: &[usize],
    feature: usize,
    config: &TreeConfig,
) -> Option<BestSplit> {
    let n = rows.len();
    let t = targets.cols();
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| {
        features
            .get(a, feature)
            .partial_cmp(&features.get(b, feature))
            .expect("finite feature values")
    });

    // prefix[i][t] = sum of target t over the first i sorted rows.
    let mut sum = vec![0.0; t];
    let mut sum_sq = vec![0.0; t];
    let mut prefix_sum = Vec::with_capacity(n + 1);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    prefix_sum.push(sum.clone());
    prefix_sq.push(sum_sq.clone());
    for &r in &order {
        for (k, &y) in targets.row(r).iter().enumerate() {
            sum[k] += y;
            sum_sq[k] += y * y;
        }
        prefix_sum.push(sum.clone());
        prefix_sq.push(sum_sq.clone());
    }

    let sse = |lo: &[f64], lo_sq: &[f64], hi: &[f64], hi_sq: &[f64], count: f64| -> f64 {
        let mut acc = 0.0;
        for k in 0..t {
            let s = hi[k] - lo[k];
            let sq = hi_sq[k] - lo_sq[k];
            acc += sq - s * s / count;
        }
        acc
    };

    let mut best: Option<BestSplit> = None;
    for pos in 1..n {
        let lo_val = features.get(order[pos - 1], feature);
        let hi_val = features.get(order[pos], feature);
        if lo_val == hi_val {
            continue;
        }
        if pos < config.min_samples_leaf || n - pos < config.min_samples_leaf {
            continue;
        }
        let threshold = lo_val + (hi_val - lo_val) / 2.0;
        let score = sse(
            &prefix_sum[0],
            &prefix_sq[0],
            &prefix_sum[pos],
            &prefix_sq[pos],
            pos as f64,
        ) + sse(
            &prefix_sum[pos],
            &prefix_sq[pos],
            &prefix_sum[n],
            &prefix_sq[n],
            (n - pos) as f64,
        );
        let better = match &best {
            None => true,
            Some(current) => score < current.score,
        };
        if better {
            best = Some(BestSplit {
                feature,
                threshold,
                score,
                left: order[..pos].to_vec(),
                right: order[pos..].to_vec(),
            });
        }
    }
    best
}

impl TreeModel {
    pub fn predict_row(&self, x: &[f64]) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { prediction } => return prediction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "tree prediction features".to_string(),
                expected: self.n_features,
                actual: features.cols(),
            });
        }
        let mut out = Matrix::zeros(features.rows(), self.n_targets);
        for i in 0..features.rows() {
            out.row_mut(i)
                .copy_from_slice(self.predict_row(features.row(i)));
        }
        Ok(out)
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

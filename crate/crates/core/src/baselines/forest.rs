//! Bootstrap-aggregated regression forest.

use serde::{Deserialize, Serialize};

use super::tree::{fit_with_sampler, TreeConfig, TreeModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{mix64, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features sampled per split, in (0, 1]. The subset size is
    /// `ceil(feature_fraction * n_features)`.
    pub feature_fraction: f64,
    /// Disable to train every member on the full sample (test hook; with
    /// `n_trees = 1` and `feature_fraction = 1.0` the forest reduces to a
    /// plain tree).
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            max_depth: 8,
            min_samples_leaf: 2,
            feature_fraction: 0.6,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

/// Train `n_trees` members, each on a seeded bootstrap resample (n draws
/// with replacement) and a per-split random feature subset. Tree `i` draws
/// from the stream `mix64(seed, i)`, so members are independent of schedule.
pub fn forest_fit(
    features: &Matrix,
    targets: &Matrix,
    config: &ForestConfig,
) -> Result<ForestModel> {
    if config.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if !(config.feature_fraction > 0.0 && config.feature_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "feature_fraction must be in (0, 1], got {}",
            config.feature_fraction
        )));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit a forest on zero rows"));
    }
    let k = ((config.feature_fraction * features.cols() as f64).ceil() as usize)
        .clamp(1, features.cols());
    let tree_config = TreeConfig {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
    };

    let mut trees = Vec::with_capacity(config.n_trees);
    for i in 0..config.n_trees {
        let mut rng = Rng::seed_from_u64(mix64(config.seed, i as u64));
        let (x, y) = if config.bootstrap {
            let draws: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
            (features.select_rows(&draws), targets.select_rows(&draws))
        } else {
            (features.clone(), targets.clone())
        };
        let sampler = if k == features.cols() { None } else { Some(k) };
        trees.push(fit_with_sampler(&x, &y, &tree_config, &mut rng, sampler)?);
    }
    Ok(ForestModel { trees })
}

impl ForestModel {
    /// Arithmetic mean of the member trees' predictions, summed in member
    /// order.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        let mut acc = self.trees[0].predict(features)?;
        for tree in &self.trees[1..] {
            let pred = tree.predict(features)?;
            for (a, &p) in acc.data_mut().iter_mut().zip(pred.data()) {
                *a += p;
            }
        }
        let scale = 1.0 / self.trees.len() as f64;
        for v in acc.data_mut() {
            *v *= scale;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::tree_fit;
    use crate::rng::Rng;

    fn fixture(n: usize, seed: u64) -> (Matrix, Matrix) {
        let mut rng = Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let y0 = x[0] * x[1] + 0.5 * x[2];
            let y1 = x[3].abs() - x[4];
            ys.push(vec![y0, y1]);
            xs.push(x);
        }
        (
            Matrix::from_rows(&xs).unwrap(),
            Matrix::from_rows(&ys).unwrap(),
        )
    }

    #[test]
    fn single_tree_full_features_no_bootstrap_reduces_to_tree_fit() {
        let (x, y) = fixture(40, 1);
        let config = ForestConfig {
            n_trees: 1,
            feature_fraction: 1.0,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let forest = forest_fit(&x, &y, &config).unwrap();
        let plain = tree_fit(
            &x,
            &y,
            &TreeConfig {
                max_depth: config.max_depth,
                min_samples_leaf: config.min_samples_leaf,
            },
            0,
        )
        .unwrap();
        assert_eq!(forest.trees[0], plain);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = fixture(30, 2);
        let config = ForestConfig {
            n_trees: 10,
            ..ForestConfig::default()
        };
        let a = forest_fit(&x, &y, &config).unwrap();
        let b = forest_fit(&x, &y, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prediction_is_exact_mean_of_members() {
        let (x, y) = fixture(25, 3);
        let config = ForestConfig {
            n_trees: 7,
            seed: 5,
            ..ForestConfig::default()
        };
        let forest = forest_fit(&x, &y, &config).unwrap();
        let combined = forest.predict(&x).unwrap();
        let member_preds: Vec<Matrix> = forest
            .trees
            .iter()
            .map(|t| t.predict(&x).unwrap())
            .collect();
        for i in 0..x.rows() {
            for t in 0..y.cols() {
                let mut mean = 0.0;
                for p in &member_preds {
                    mean += p.get(i, t);
                }
                mean /= member_preds.len() as f64;
                assert!(
                    (combined.get(i, t) - mean).abs() <= 1e-12,
                    "row {i} head {t}"
                );
            }
        }
    }

    #[test]
    fn forest_mse_not_worse_than_worst_member() {
        let (x, y) = fixture(60, 4);
        let config = ForestConfig {
            n_trees: 12,
            seed: 9,
            ..ForestConfig::default()
        };
        let forest = forest_fit(&x, &y, &config).unwrap();
        let mse = |pred: &Matrix| -> f64 {
            pred.data()
                .iter()
                .zip(y.data())
                .map(|(&p, &t)| (p - t) * (p - t))
                .sum::<f64>()
                / pred.data().len() as f64
        };
        let forest_mse = mse(&forest.predict(&x).unwrap());
        let worst = forest
            .trees
            .iter()
            .map(|t| mse(&t.predict(&x).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            forest_mse <= worst + 1e-12,
            "forest {forest_mse} vs worst member {worst}"
        );
    }

    #[test]
    fn rejects_bad_config() {
        let (x, y) = fixture(10, 5);
        let zero_trees = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(forest_fit(&x, &y, &zero_trees).is_err());
        let bad_fraction = ForestConfig {
            feature_fraction: 0.0,
            ..ForestConfig::default()
        };
        assert!(forest_fit(&x, &y, &bad_fraction).is_err());
    }
}

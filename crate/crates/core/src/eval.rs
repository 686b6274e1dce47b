//! Metrics, cross-validation, grid search, and model comparison.
//!
//! "Accuracy" throughout the reports is the r-squared of the capacity head
//! (target column 0) — the standard unitless regression score. Every split
//! a report was computed on is identified by a fingerprint over its row
//! assignments, so identical-split claims are checkable from the report
//! alone.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{forest_fit, linreg_fit, tree_fit, ForestConfig, LinearModel, TreeConfig};
use crate::baselines::{ForestModel, TreeModel};
use crate::error::{Error, Result};
use crate::features::{
    kfold_split, leave_one_battery_out, split_holdout, SplitSpec, SupervisedSet,
};
use crate::linalg::Matrix;
use crate::net::{
    init_network, train, Activation, LayerSpec, Network, NetworkSpec, TrainConfig, TrainHistory,
};
use crate::rng::mix64;

/// Scores of one target head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMetrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when fewer than two rows were scored.
    pub r2: Option<f64>,
}

/// Per-head scores for one prediction batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub heads: Vec<HeadMetrics>,
}

impl Metrics {
    /// Alias reported as "accuracy": r-squared of head 0 (the capacity head).
    pub fn accuracy(&self) -> Option<f64> {
        self.heads.first().and_then(|h| h.r2)
    }

    /// Mean of the per-head MAE values (equal head widths).
    pub fn mean_mae(&self) -> f64 {
        if self.heads.is_empty() {
            return f64::NAN;
        }
        self.heads.iter().map(|h| h.mae).sum::<f64>() / self.heads.len() as f64
    }
}

/// Per-head MAE/MSE/RMSE and r-squared.
///
/// r2 = 1 - SS_res / SS_tot with SS_tot around the target's own mean. A
/// zero-variance target scores 1 on an exact prediction and 0 otherwise;
/// fewer than two rows yield `None`.
pub fn compute_metrics(pred: &Matrix, target: &Matrix) -> Result<Metrics> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::DimensionMismatch {
            what: "metric operands".to_string(),
            expected: target.data().len(),
            actual: pred.data().len(),
        });
    }
    let n = pred.rows();
    if n == 0 {
        return Err(Error::invalid("metrics over zero rows"));
    }
    let mut heads = Vec::with_capacity(pred.cols());
    for j in 0..pred.cols() {
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        let mut target_sum = 0.0;
        for i in 0..n {
            let (p, y) = (pred.get(i, j), target.get(i, j));
            abs_sum += (p - y).abs();
            sq_sum += (p - y) * (p - y);
            target_sum += y;
        }
        let mse = sq_sum / n as f64;
        let r2 = if n < 2 {
            None
        } else {
            let mean = target_sum / n as f64;
            let ss_tot: f64 = (0..n).map(|i| (target.get(i, j) - mean).powi(2)).sum();
            Some(if ss_tot == 0.0 {
                if sq_sum == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 - sq_sum / ss_tot
            })
        };
        heads.push(HeadMetrics {
            mae: abs_sum / n as f64,
            mse,
            rmse: mse.sqrt(),
            r2,
        });
    }
    Ok(Metrics { heads })
}

/// Anything that can score scaled feature rows.
pub trait Predictor {
    fn predict_matrix(&self, features: &Matrix) -> Result<Matrix>;
}

impl Predictor for Network {
    fn predict_matrix(&self, features: &Matrix) -> Result<Matrix> {
        self.predict_scaled(features)
    }
}

impl Predictor for LinearModel {
    fn predict_matrix(&self, features: &Matrix) -> Result<Matrix> {
        self.predict(features)
    }
}

impl Predictor for TreeModel {
    fn predict_matrix(&self, features: &Matrix) -> Result<Matrix> {
        self.predict(features)
    }
}

impl Predictor for ForestModel {
    fn predict_matrix(&self, features: &Matrix) -> Result<Matrix> {
        self.predict(features)
    }
}

/// Mean and sample standard deviation of one head's metrics over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSummary {
    pub mae_mean: f64,
    pub mae_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub r2_mean: Option<f64>,
    pub r2_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// Validation metrics per fold, in fold order.
    pub folds: Vec<Metrics>,
    pub summary: Vec<HeadSummary>,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

fn summarize(folds: &[Metrics]) -> Vec<HeadSummary> {
    let head_count = folds.first().map_or(0, |m| m.heads.len());
    (0..head_count)
        .map(|j| {
            let collect = |f: &dyn Fn(&HeadMetrics) -> f64| -> Vec<f64> {
                folds.iter().map(|m| f(&m.heads[j])).collect()
            };
            let (mae_mean, mae_std) = mean_and_std(&collect(&|h| h.mae));
            let (mse_mean, mse_std) = mean_and_std(&collect(&|h| h.mse));
            let (rmse_mean, rmse_std) = mean_and_std(&collect(&|h| h.rmse));
            let r2s: Vec<f64> = folds.iter().filter_map(|m| m.heads[j].r2).collect();
            let (r2_mean, r2_std) = if r2s.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_std(&r2s);
                (Some(m), Some(s))
            };
            HeadSummary {
                mae_mean,
                mae_std,
                mse_mean,
                mse_std,
                rmse_mean,
                rmse_std,
                r2_mean,
                r2_std,
            }
        })
        .collect()
}

/// K-fold cross-validation of an arbitrary model family.
///
/// Each fold's statistics (normalizer, RUL denominator) come from its
/// training side only; the factory receives the fold's training set and a
/// fold seed derived as `mix64(seed, fold_index)`. Fold errors propagate
/// with the fold index attached.
pub fn cross_validate<F>(
    fit: F,
    set: &SupervisedSet,
    k: usize,
    seed: u64,
) -> Result<CrossValidation>
where
    F: Fn(&SupervisedSet, u64) -> Result<Box<dyn Predictor>>,
{
    let folds = kfold_split(set, k, seed)?;
    let mut outcomes = Vec::with_capacity(folds.len());
    for (i, (train_set, val_set)) in folds.iter().enumerate() {
        let model = fit(train_set, mix64(seed, i as u64)).map_err(|e| e.in_fold(i))?;
        let pred = model
            .predict_matrix(val_set.features())
            .map_err(|e| e.in_fold(i))?;
        let metrics = compute_metrics(&pred, val_set.targets()).map_err(|e| e.in_fold(i))?;
        outcomes.push(metrics);
    }
    let summary = summarize(&outcomes);
    Ok(CrossValidation {
        folds: outcomes,
        summary,
    })
}

/// Hyperparameter axes for the sweep. Every axis must be non-empty; the
/// total combination count is the product of the axis sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Full unit stacks, output layer included (e.g. `[10, 7, 3]`).
    pub layer_configs: Vec<Vec<usize>>,
    /// Hidden-layer activation; the output layer stays identity.
    pub activations: Vec<Activation>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub epoch_counts: Vec<usize>,
    pub dropout_rates: Vec<f64>,
    pub base_seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("layer_configs", self.layer_configs.is_empty()),
            ("activations", self.activations.is_empty()),
            ("learning_rates", self.learning_rates.is_empty()),
            ("batch_sizes", self.batch_sizes.is_empty()),
            ("epoch_counts", self.epoch_counts.is_empty()),
            ("dropout_rates", self.dropout_rates.is_empty()),
        ];
        for (name, empty) in axes {
            if empty {
                return Err(Error::invalid(format!("grid axis `{name}` is empty")));
            }
        }
        Ok(())
    }

    pub fn combination_count(&self) -> usize {
        self.layer_configs.len()
            * self.activations.len()
            * self.learning_rates.len()
            * self.batch_sizes.len()
            * self.epoch_counts.len()
            * self.dropout_rates.len()
    }

    /// Enumerate combinations with the rightmost axis fastest; index order
    /// is the ranking tie-break of last resort.
    pub fn enumerate(&self) -> Vec<GridCombo> {
        let mut combos = Vec::with_capacity(self.combination_count());
        let mut index = 0;
        for layers in &self.layer_configs {
            for &activation in &self.activations {
                for &learning_rate in &self.learning_rates {
                    for &batch_size in &self.batch_sizes {
                        for &epochs in &self.epoch_counts {
                            for &dropout in &self.dropout_rates {
                                combos.push(GridCombo {
                                    index,
                                    layers: layers.clone(),
                                    activation,
                                    learning_rate,
                                    batch_size,
                                    epochs,
                                    dropout,
                                    seed: mix64(self.base_seed, index as u64),
                                });
                                index += 1;
                            }
                        }
                    }
                }
            }
        }
        combos
    }
}

/// One point of the grid, with its derived seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCombo {
    pub index: usize,
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub combo: GridCombo,
    pub train_metrics: Option<Metrics>,
    pub val_metrics: Option<Metrics>,
    /// r-squared of the validation capacity head (the ranking key).
    pub accuracy: Option<f64>,
    pub diverged: bool,
    pub history: TrainHistory,
    pub wall_time_ms: u64,
    pub split_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// All evaluated combinations, best first.
    pub reports: Vec<EvalReport>,
    pub split_fingerprint: String,
}

impl GridSearchResult {
    pub fn best(&self) -> &EvalReport {
        &self.reports[0]
    }
}

fn resolve_splits(
    set: &SupervisedSet,
    split: &SplitSpec,
) -> Result<Vec<(SupervisedSet, SupervisedSet)>> {
    match *split {
        SplitSpec::Holdout {
            test_fraction,
            seed,
        } => Ok(vec![split_holdout(set, test_fraction, seed)?]),
        SplitSpec::KFold { k, seed } => kfold_split(set, k, seed),
        SplitSpec::LeaveOneBatteryOut => leave_one_battery_out(set),
    }
}

/// FNV-1a over every fold's row assignments.
fn split_fingerprint(splits: &[(SupervisedSet, SupervisedSet)]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for (fold, (train_side, val_side)) in splits.iter().enumerate() {
        eat(&(fold as u64).to_le_bytes());
        for (tag, side) in [(b'T', train_side), (b'V', val_side)] {
            eat(&[tag]);
            for m in side.meta() {
                eat(m.battery_id.as_bytes());
                eat(&m.cycle.to_le_bytes());
            }
        }
    }
    format!("{hash:016x}")
}

/// One network configuration to fit.
struct NetParams<'a> {
    layers: &'a [usize],
    activation: Activation,
    dropout: f64,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
}

/// Build and train one network configuration; the hidden layers share the
/// given activation, the output layer is identity. The trained network
/// carries the training set's scaling statistics.
fn fit_network(
    train_set: &SupervisedSet,
    validation: Option<&SupervisedSet>,
    params: &NetParams,
) -> Result<(Network, TrainHistory)> {
    let layers = params.layers;
    if layers.is_empty() {
        return Err(Error::invalid("layer configuration is empty"));
    }
    let output_dim = train_set.targets().cols();
    if *layers.last().expect("non-empty") != output_dim {
        return Err(Error::invalid(format!(
            "layer configuration {layers:?} must end in the target width {output_dim}"
        )));
    }
    let layer_specs: Vec<LayerSpec> = layers
        .iter()
        .enumerate()
        .map(|(i, &units)| LayerSpec {
            units,
            activation: if i + 1 == layers.len() {
                Activation::Identity
            } else {
                params.activation
            },
        })
        .collect();
    let spec = NetworkSpec {
        input_dim: train_set.features().cols(),
        layers: layer_specs,
        dropout: vec![params.dropout; layers.len() - 1],
        seed: params.seed,
    };
    let mut net = init_network(&spec)?;
    let config = TrainConfig {
        learning_rate: params.learning_rate,
        batch_size: params.batch_size,
        epochs: params.epochs,
        seed: mix64(params.seed, 1),
        ..TrainConfig::default()
    };
    let history = train(
        &mut net,
        train_set.features(),
        train_set.targets(),
        validation.map(|v| (v.features(), v.targets())),
        &config,
    )?;
    net.attach_scaling(train_set.normalizer().clone(), train_set.labels().clone());
    Ok((net, history))
}

/// Aggregate fold metrics: MAE/MSE are fold means, RMSE is recomputed as
/// sqrt of the mean MSE, r2 averages the folds that defined it.
fn aggregate_metrics(folds: &[Metrics]) -> Option<Metrics> {
    let head_count = folds.first()?.heads.len();
    let heads = (0..head_count)
        .map(|j| {
            let mae = folds.iter().map(|m| m.heads[j].mae).sum::<f64>() / folds.len() as f64;
            let mse = folds.iter().map(|m| m.heads[j].mse).sum::<f64>() / folds.len() as f64;
            let r2s: Vec<f64> = folds.iter().filter_map(|m| m.heads[j].r2).collect();
            let r2 = if r2s.is_empty() {
                None
            } else {
                Some(r2s.iter().sum::<f64>() / r2s.len() as f64)
            };
            HeadMetrics {
                mae,
                mse,
                rmse: mse.sqrt(),
                r2,
            }
        })
        .collect();
    Some(Metrics { heads })
}

/// Exhaustive sweep over the grid, every combination trained with its
/// derived seed on the same split(s).
///
/// Ranking: non-diverged before diverged, then validation accuracy
/// descending, then validation MAE ascending, then combination index. A
/// diverged combination is flagged and ranked last, never fatal.
pub fn grid_search(
    grid: &GridSpec,
    set: &SupervisedSet,
    split: &SplitSpec,
) -> Result<GridSearchResult> {
    grid.validate()?;
    let splits = resolve_splits(set, split)?;
    let fingerprint = split_fingerprint(&splits);

    let mut reports = Vec::with_capacity(grid.combination_count());
    for combo in grid.enumerate() {
        let started = Instant::now();
        let mut fold_train = Vec::with_capacity(splits.len());
        let mut fold_val = Vec::with_capacity(splits.len());
        let mut history = TrainHistory::default();
        let mut diverged = false;
        for (train_set, val_set) in &splits {
            match fit_network(
                train_set,
                Some(val_set),
                &NetParams {
                    layers: &combo.layers,
                    activation: combo.activation,
                    dropout: combo.dropout,
                    learning_rate: combo.learning_rate,
                    batch_size: combo.batch_size,
                    epochs: combo.epochs,
                    seed: combo.seed,
                },
            ) {
                Ok((net, fold_history)) => {
                    let train_pred = net.predict_scaled(train_set.features())?;
                    fold_train.push(compute_metrics(&train_pred, train_set.targets())?);
                    let val_pred = net.predict_scaled(val_set.features())?;
                    fold_val.push(compute_metrics(&val_pred, val_set.targets())?);
                    history = fold_history;
                }
                Err(Error::Diverged { .. }) => {
                    diverged = true;
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        let val_metrics = if diverged {
            None
        } else {
            aggregate_metrics(&fold_val)
        };
        let accuracy = val_metrics.as_ref().and_then(Metrics::accuracy);
        reports.push(EvalReport {
            combo,
            train_metrics: if diverged {
                None
            } else {
                aggregate_metrics(&fold_train)
            },
            val_metrics,
            accuracy,
            diverged,
            history: if diverged {
                TrainHistory::default()
            } else {
                history
            },
            wall_time_ms: started.elapsed().as_millis() as u64,
            split_fingerprint: fingerprint.clone(),
        });
    }

    reports.sort_by(|a, b| {
        use std::cmp::Ordering;
        match (a.diverged, b.diverged) {
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            (true, true) => return a.combo.index.cmp(&b.combo.index),
            (false, false) => {}
        }
        let acc_a = a.accuracy.unwrap_or(f64::NEG_INFINITY);
        let acc_b = b.accuracy.unwrap_or(f64::NEG_INFINITY);
        acc_b
            .partial_cmp(&acc_a)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                let mae_a = a
                    .val_metrics
                    .as_ref()
                    .map_or(f64::INFINITY, Metrics::mean_mae);
                let mae_b = b
                    .val_metrics
                    .as_ref()
                    .map_or(f64::INFINITY, Metrics::mean_mae);
                mae_a.partial_cmp(&mae_b).unwrap_or(Ordering::Equal)
            })
            .then_with(|| a.combo.index.cmp(&b.combo.index))
    });

    Ok(GridSearchResult {
        reports,
        split_fingerprint: fingerprint,
    })
}

/// A model family entry for side-by-side comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelConfig {
    Network {
        layers: Vec<usize>,
        activation: Activation,
        dropout: f64,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
    },
    Linear,
    Tree {
        max_depth: usize,
        min_samples_leaf: usize,
    },
    Forest {
        n_trees: usize,
        max_depth: usize,
        min_samples_leaf: usize,
        feature_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub seed: u64,
    pub train_metrics: Option<Metrics>,
    pub val_metrics: Option<Metrics>,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub wall_time_ms: u64,
    pub split_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub split_fingerprint: String,
}

/// Train every configured model on bit-identical splits and report per-head
/// metrics plus the accuracy alias. A failing model yields an error row;
/// the remaining rows still run.
pub fn compare_models(
    set: &SupervisedSet,
    split: &SplitSpec,
    configs: &[(String, ModelConfig)],
    base_seed: u64,
) -> Result<ComparisonReport> {
    if configs.is_empty() {
        return Err(Error::invalid("no model configurations given"));
    }
    let splits = resolve_splits(set, split)?;
    let fingerprint = split_fingerprint(&splits);
    let mut rows = Vec::with_capacity(configs.len());
    for (row_index, (name, config)) in configs.iter().enumerate() {
        let seed = mix64(base_seed, row_index as u64);
        let started = Instant::now();
        let mut fold_train = Vec::new();
        let mut fold_val = Vec::new();
        let mut error: Option<String> = None;
        for (train_set, val_set) in &splits {
            match fit_one(config, train_set, seed) {
                Ok(model) => {
                    let outcome = (|| -> Result<(Metrics, Metrics)> {
                        let tp = model.predict_matrix(train_set.features())?;
                        let vp = model.predict_matrix(val_set.features())?;
                        Ok((
                            compute_metrics(&tp, train_set.targets())?,
                            compute_metrics(&vp, val_set.targets())?,
                        ))
                    })();
                    match outcome {
                        Ok((t, v)) => {
                            fold_train.push(t);
                            fold_val.push(v);
                        }
                        Err(e) => {
                            error = Some(e.to_string());
                            break;
                        }
                    }
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let (train_metrics, val_metrics) = if error.is_some() {
            (None, None)
        } else {
            (aggregate_metrics(&fold_train), aggregate_metrics(&fold_val))
        };
        let accuracy = val_metrics.as_ref().and_then(Metrics::accuracy);
        rows.push(ComparisonRow {
            name: name.clone(),
            seed,
            train_metrics,
            val_metrics,
            accuracy,
            error,
            wall_time_ms: started.elapsed().as_millis() as u64,
            split_fingerprint: fingerprint.clone(),
        });
    }
    Ok(ComparisonReport {
        rows,
        split_fingerprint: fingerprint,
    })
}

fn fit_one(
    config: &ModelConfig,
    train_set: &SupervisedSet,
    seed: u64,
) -> Result<Box<dyn Predictor>> {
    match config {
        ModelConfig::Network {
            layers,
            activation,
            dropout,
            learning_rate,
            batch_size,
            epochs,
        } => {
            // Validation inside the comparison is scored externally; train
            // without a monitored set.
            let (net, _history) = fit_network(
                train_set,
                None,
                &NetParams {
                    layers,
                    activation: *activation,
                    dropout: *dropout,
                    learning_rate: *learning_rate,
                    batch_size: *batch_size,
                    epochs: *epochs,
                    seed,
                },
            )?;
            Ok(Box::new(net))
        }
        ModelConfig::Linear => Ok(Box::new(linreg_fit(
            train_set.features(),
            train_set.targets(),
        )?)),
        ModelConfig::Tree {
            max_depth,
            min_samples_leaf,
        } => Ok(Box::new(tree_fit(
            train_set.features(),
            train_set.targets(),
            &TreeConfig {
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
            },
            seed,
        )?)),
        ModelConfig::Forest {
            n_trees,
            max_depth,
            min_samples_leaf,
            feature_fraction,
        } => Ok(Box::new(forest_fit(
            train_set.features(),
            train_set.targets(),
            &ForestConfig {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                feature_fraction: *feature_fraction,
                bootstrap: true,
                seed,
            },
        )?)),
    }
}

/// Training-curve CSV: `epoch,train_loss,val_loss,train_mae,val_mae`, one
/// row per epoch (1-based), empty cells where no validation set ran.
pub fn curves_to_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,train_mae,val_mae\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, e) in history.epochs.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            e.train_loss,
            opt(e.val_loss),
            e.train_mae,
            opt(e.val_mae)
        ));
    }
    out
}

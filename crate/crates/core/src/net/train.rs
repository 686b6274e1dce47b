//! Training loop: minibatch MSE with the Adam optimizer.

use serde::{Deserialize, Serialize};

use super::{sample_masks, Gradients, Network};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Optimizer and schedule settings. The loss is MSE; MAE is monitored
/// alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("Adam betas must be in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam epsilon must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Metrics recorded after each epoch. Train metrics are the epoch mean of
/// the per-sample losses seen during the gradient passes (dropout active,
/// weights moving between batches); validation metrics are inference-mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub train_loss: f64,
    pub train_mae: f64,
    pub val_loss: Option<f64>,
    pub val_mae: Option<f64>,
}

/// One entry per epoch actually run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Summary embedded in saved model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_train_loss: f64,
    pub final_train_mae: f64,
    pub final_val_loss: Option<f64>,
    pub final_val_mae: Option<f64>,
}

/// First/second moment accumulators, one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Matrix>,
    v_weights: Vec<Matrix>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let zeros_w = || {
            net.weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect::<Vec<_>>()
        };
        let zeros_b = || {
            net.biases
                .iter()
                .map(|b| vec![0.0; b.len()])
                .collect::<Vec<_>>()
        };
        AdamState {
            m_weights: zeros_w(),
            v_weights: zeros_w(),
            m_biases: zeros_b(),
            v_biases: zeros_b(),
        }
    }
}

/// One Adam update at step `t` (1-based):
///
/// ```text
/// m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
/// m_hat = m / (1 - b1^t)      v_hat = v / (1 - b2^t)
/// w <- w - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adam_step(
    net: &mut Network,
    state: &mut AdamState,
    grads: &Gradients,
    config: &TrainConfig,
    t: usize,
) {
    debug_assert!(t >= 1);
    let bias1 = 1.0 - config.beta1.powi(t as i32);
    let bias2 = 1.0 - config.beta2.powi(t as i32);
    let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    };
    for l in 0..net.weights.len() {
        let m = state.m_weights[l].data_mut();
        let v = state.v_weights[l].data_mut();
        let g = grads.d_weights[l].data();
        for (((w, m), v), &g) in net.weights[l]
            .data_mut()
            .iter_mut()
            .zip(m.iter_mut())
            .zip(v.iter_mut())
            .zip(g)
        {
            update(w, m, v, g);
        }
        for (((b, m), v), &g) in net.biases[l]
            .iter_mut()
            .zip(state.m_biases[l].iter_mut())
            .zip(state.v_biases[l].iter_mut())
            .zip(grads.d_biases[l].iter())
        {
            update(b, m, v, g);
        }
    }
}

/// Train in place and return the per-epoch history.
///
/// Each epoch shuffles the rows with the seeded generator, walks them in
/// batches (the last short batch is kept), averages per-sample gradients
/// over each batch and applies one Adam step per batch. Fresh dropout masks
/// are drawn per sample. A non-finite batch loss aborts with a diverged
/// error naming the 1-based epoch and batch. Fully deterministic per seed.
pub fn train(
    net: &mut Network,
    features: &Matrix,
    targets: &Matrix,
    validation: Option<(&Matrix, &Matrix)>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if targets.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "training targets".to_string(),
            expected: n,
            actual: targets.rows(),
        });
    }
    if features.cols() != net.spec.input_dim {
        return Err(Error::DimensionMismatch {
            what: "training features".to_string(),
            expected: net.spec.input_dim,
            actual: features.cols(),
        });
    }
    if targets.cols() != net.spec.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "training targets".to_string(),
            expected: net.spec.output_dim(),
            actual: targets.cols(),
        });
    }

    let batch_size = config.batch_size.min(n);
    let mut rng = Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(net);
    let mut history = TrainHistory::default();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut mae_sum = 0.0;
        for (batch_no, chunk) in order.chunks(batch_size).enumerate() {
            let mut grads = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for &row in chunk {
                let masks = sample_masks(&net.spec, &mut rng);
                let cache = net.forward_training(features.row(row), &masks)?;
                let target = targets.row(row);
                let d = target.len() as f64;
                let (mut se, mut ae) = (0.0, 0.0);
                for (&o, &y) in cache.output().iter().zip(target) {
                    se += (o - y) * (o - y);
                    ae += (o - y).abs();
                }
                batch_loss += se / d;
                mae_sum += ae / d;
                let sample_grads = net.backward(&cache, target)?;
                grads.accumulate(&sample_grads);
            }
            loss_sum += batch_loss;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: batch_no + 1,
                });
            }
            grads.scale(1.0 / chunk.len() as f64);
            step += 1;
            adam_step(net, &mut state, &grads, config, step);
        }

        let (val_loss, val_mae) = match validation {
            Some((vf, vt)) => {
                let pred = net.predict_scaled(vf)?;
                (
                    Some(super::loss_mse(&pred, vt)?),
                    Some(super::loss_mae(&pred, vt)?),
                )
            }
            None => (None, None),
        };
        history.epochs.push(EpochMetrics {
            train_loss: loss_sum / n as f64,
            train_mae: mae_sum / n as f64,
            val_loss,
            val_mae,
        });
    }

    if let Some(last) = history.epochs.last() {
        net.training = Some(TrainingMeta {
            seed: config.seed,
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            final_train_loss: last.train_loss,
            final_train_mae: last.train_mae,
            final_val_loss: last.val_loss,
            final_val_mae: last.val_mae,
        });
    }
    Ok(history)
}

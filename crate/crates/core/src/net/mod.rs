//! Sequential dense network with analytic backpropagation.
//!
//! The stack is fully connected layers with configurable activations and
//! inverted dropout after each non-final layer. Gradients are computed
//! analytically (no autodiff framework); see [`crate::gradcheck`] for the
//! finite-difference harness that validates them.
//!
//! Shapes: layer `l` owns a weight matrix of `(units_out, units_in)` and a
//! bias vector of `units_out`. Forward is `z = W a + b`, `h = act(z)`, and in
//! training mode `a = h * mask / (1 - p)` with `mask ~ Bernoulli(1 - p)`
//! drawn from the seeded generator; inference applies no mask and no scaling.

mod train;

pub use train::{
    adam_step, train, AdamState, EpochMetrics, TrainConfig, TrainHistory, TrainingMeta,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LabelScaling, Normalizer};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Elementwise activation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation. `relu` uses the
    /// subgradient 0 at exactly zero.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!(
                "unknown activation `{other}` (expected tanh|sigmoid|relu|identity)"
            ))),
        }
    }
}

/// One dense layer: unit count and activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

/// Architecture description: layer sizes, activations, dropout rates, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// One rate per non-final layer, each in [0, 1).
    pub dropout: Vec<f64>,
    pub seed: u64,
}

impl NetworkSpec {
    /// The 5 -> 10 -> 7 -> 3 stack with relu hidden layers, identity head,
    /// and 0.2 dropout after each hidden layer.
    pub fn default_with_seed(seed: u64) -> Self {
        NetworkSpec {
            input_dim: 5,
            layers: vec![
                LayerSpec {
                    units: 10,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    units: 7,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    units: 3,
                    activation: Activation::Identity,
                },
            ],
            dropout: vec![0.2, 0.2],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if self.layers.iter().any(|l| l.units == 0) {
            return Err(Error::invalid("layer unit counts must be positive"));
        }
        if self.dropout.len() != self.layers.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} dropout rates (one per non-final layer), got {}",
                self.layers.len() - 1,
                self.dropout.len()
            )));
        }
        if self.dropout.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(Error::invalid("dropout rates must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.units)
    }

    /// Trainable parameters per layer: `in * out + out`. Dropout contributes 0.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        let mut counts = Vec::with_capacity(self.layers.len());
        let mut fan_in = self.input_dim;
        for layer in &self.layers {
            counts.push(fan_in * layer.units + layer.units);
            fan_in = layer.units;
        }
        counts
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }
}

/// Weights, biases, and optional scaling statistics for self-contained
/// inference on raw feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) spec: NetworkSpec,
    pub(crate) weights: Vec<Matrix>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) normalizer: Option<Normalizer>,
    pub(crate) labels: Option<LabelScaling>,
    pub(crate) training: Option<TrainingMeta>,
}

/// Per-layer Bernoulli keep masks for one training-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// One mask per non-final layer, sized to that layer's units.
    pub masks: Vec<Vec<bool>>,
}

/// Draw a fresh set of keep masks (`true` with probability `1 - p`).
pub fn sample_masks(spec: &NetworkSpec, rng: &mut Rng) -> DropoutMasks {
    let masks = spec
        .layers
        .iter()
        .take(spec.layers.len() - 1)
        .zip(&spec.dropout)
        .map(|(layer, &p)| (0..layer.units).map(|_| rng.bernoulli(1.0 - p)).collect())
        .collect();
    DropoutMasks { masks }
}

/// Everything backward needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Pre-activations z_l per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation, post-dropout outputs a_l per layer.
    post: Vec<Vec<f64>>,
    masks: DropoutMasks,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache has at least one layer")
    }

    /// Post-activation, post-dropout output of every layer (the last entry
    /// is the network output).
    pub fn layer_outputs(&self) -> &[Vec<f64>] {
        &self.post
    }
}

/// Per-layer weight and bias gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            d_weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (acc, g) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        for (acc, g) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (a, &b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            for v in w.data_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.d_biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }
}

/// Initialize a network from its spec: Glorot-uniform weights within
/// `±sqrt(6 / (fan_in + fan_out))`, zero biases, deterministic per seed.
pub fn init_network(spec: &NetworkSpec) -> Result<Network> {
    spec.validate()?;
    let mut rng = Rng::seed_from_u64(spec.seed);
    let mut weights = Vec::with_capacity(spec.layers.len());
    let mut biases = Vec::with_capacity(spec.layers.len());
    let mut fan_in = spec.input_dim;
    for layer in &spec.layers {
        let fan_out = layer.units;
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for v in w.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
        fan_in = fan_out;
    }
    Ok(Network {
        spec: spec.clone(),
        weights,
        biases,
        normalizer: None,
        labels: None,
        training: None,
    })
}

/// Assemble a network from explicit weights and biases, validating every
/// layer shape against the spec.
pub fn network_from_parts(
    spec: NetworkSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
) -> Result<Network> {
    spec.validate()?;
    if weights.len() != spec.layers.len() || biases.len() != spec.layers.len() {
        return Err(Error::invalid(format!(
            "expected {} weight/bias layers, got {}/{}",
            spec.layers.len(),
            weights.len(),
            biases.len()
        )));
    }
    let mut fan_in = spec.input_dim;
    for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
        let units = spec.layers[l].units;
        if w.rows() != units || w.cols() != fan_in || b.len() != units {
            return Err(Error::invalid(format!(
                "layer {l} shape mismatch: weights {}x{}, biases {}, expected {units}x{fan_in}",
                w.rows(),
                w.cols(),
                b.len()
            )));
        }
        if w.data().iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "layer {l} has non-finite parameters"
            )));
        }
        fan_in = units;
    }
    Ok(Network {
        spec,
        weights,
        biases,
        normalizer: None,
        labels: None,
        training: None,
    })
}

/// De-normalized predictions over a batch of raw feature rows.
#[derive(Debug, Clone)]
pub struct Predictions {
    /// Raw network outputs in scaled target space, n x 3.
    pub scaled: Matrix,
    pub capacity_ah: Vec<f64>,
    pub soh: Vec<f64>,
    pub rul_cycles: Vec<f64>,
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn labels(&self) -> Option<&LabelScaling> {
        self.labels.as_ref()
    }

    pub fn training_meta(&self) -> Option<&TrainingMeta> {
        self.training.as_ref()
    }

    /// Attach the scaling statistics the network was trained against so that
    /// it can score raw feature rows on its own.
    pub fn attach_scaling(&mut self, normalizer: Normalizer, labels: LabelScaling) {
        self.normalizer = Some(normalizer);
        self.labels = Some(labels);
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                what: "network input".to_string(),
                expected: self.spec.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Inference-mode forward: no masks, no scaling.
    pub fn forward_inference(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for (layer, (w, b)) in self
            .spec
            .layers
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
        {
            a = affine(w, b, &a)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        Ok(a)
    }

    /// Training-mode forward with the given frozen masks; returns the output
    /// and the cache backward needs.
    pub fn forward_training(&self, x: &[f64], masks: &DropoutMasks) -> Result<ForwardCache> {
        self.check_input(x)?;
        let hidden = self.spec.layers.len() - 1;
        if masks.masks.len() != hidden
            || masks
                .masks
                .iter()
                .zip(&self.spec.layers)
                .any(|(m, l)| m.len() != l.units)
        {
            return Err(Error::invalid(
                "dropout masks do not match the network architecture",
            ));
        }
        let mut pre = Vec::with_capacity(self.spec.layers.len());
        let mut post = Vec::with_capacity(self.spec.layers.len());
        let mut a = x.to_vec();
        for (l, (layer, (w, b))) in self
            .spec
            .layers
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .enumerate()
        {
            let z = affine(w, b, &a);
            let mut h: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            if l < hidden {
                let keep_scale = 1.0 / (1.0 - self.spec.dropout[l]);
                for (v, &keep) in h.iter_mut().zip(&masks.masks[l]) {
                    *v = if keep { *v * keep_scale } else { 0.0 };
                }
            }
            pre.push(z);
            a = h.clone();
            post.push(h);
        }
        Ok(ForwardCache {
            input: x.to_vec(),
            pre,
            post,
            masks: masks.clone(),
        })
    }

    /// Analytic gradients of the per-sample MSE loss (mean over output
    /// entries) through the cached forward pass and its dropout masks.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<Gradients> {
        let layer_count = self.spec.layers.len();
        if cache.pre.len() != layer_count
            || cache.input.len() != self.spec.input_dim
            || cache
                .pre
                .iter()
                .zip(&self.spec.layers)
                .any(|(z, l)| z.len() != l.units)
        {
            return Err(Error::invalid(
                "forward cache does not match this network (stale or foreign cache)",
            ));
        }
        let output = cache.output();
        if target.len() != output.len() {
            return Err(Error::DimensionMismatch {
                what: "backward target".to_string(),
                expected: output.len(),
                actual: target.len(),
            });
        }

        let mut grads = Gradients::zeros_like(self);
        let d = output.len() as f64;
        // dL/dz for the output layer.
        let head = &self.spec.layers[layer_count - 1];
        let mut delta: Vec<f64> = output
            .iter()
            .zip(target)
            .zip(&cache.pre[layer_count - 1])
            .map(|((&o, &y), &z)| 2.0 * (o - y) / d * head.activation.derivative(z))
            .collect();

        for l in (0..layer_count).rev() {
            let below: &[f64] = if l == 0 {
                &cache.input
            } else {
                &cache.post[l - 1]
            };
            let dw = grads.d_weights[l].data_mut();
            let cols = below.len();
            for (i, &di) in delta.iter().enumerate() {
                grads.d_biases[l][i] = di;
                for (j, &aj) in below.iter().enumerate() {
                    dw[i * cols + j] = di * aj;
                }
            }
            if l == 0 {
                break;
            }
            // Propagate to the layer below: through W, the dropout mask, and
            // that layer's activation derivative.
            let w = &self.weights[l];
            let keep_scale = 1.0 / (1.0 - self.spec.dropout[l - 1]);
            let lower = &self.spec.layers[l - 1];
            let mut next = vec![0.0; w.cols()];
            for (j, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &di) in delta.iter().enumerate() {
                    acc += w.get(i, j) * di;
                }
                let mask = if cache.masks.masks[l - 1][j] {
                    keep_scale
                } else {
                    0.0
                };
                *slot = acc * mask * lower.activation.derivative(cache.pre[l - 1][j]);
            }
            delta = next;
        }
        Ok(grads)
    }

    /// Inference-mode forward over every row of an already-scaled feature
    /// matrix.
    pub fn predict_scaled(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                what: "prediction features".to_string(),
                expected: self.spec.input_dim,
                actual: features.cols(),
            });
        }
        let mut out = Matrix::zeros(features.rows(), self.spec.output_dim());
        for i in 0..features.rows() {
            let y = self.forward_inference(features.row(i))?;
            out.row_mut(i).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Self-contained prediction on raw feature rows: scales inputs with the
    /// embedded normalizer, runs inference, and inverts the target scaling
    /// into physical units.
    pub fn predict(&self, raw_features: &Matrix) -> Result<Predictions> {
        let normalizer = self
            .normalizer
            .as_ref()
            .ok_or_else(|| Error::invalid("network has no attached normalizer"))?;
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("network has no attached label constants"))?;
        if self.spec.output_dim() != 3 {
            return Err(Error::invalid(
                "de-normalized prediction needs the 3-head (capacity, soh, rul) output layer",
            ));
        }
        let scaled_in = normalizer.apply(raw_features)?;
        let scaled = self.predict_scaled(&scaled_in)?;
        let n = scaled.rows();
        let mut capacity = Vec::with_capacity(n);
        let mut soh = Vec::with_capacity(n);
        let mut rul = Vec::with_capacity(n);
        for i in 0..n {
            capacity.push(
                scaled.get(i, 0) * labels.capacity_overshoot_factor * labels.rated_capacity_ah,
            );
            soh.push(scaled.get(i, 1));
            rul.push(scaled.get(i, 2) * labels.rul_denominator);
        }
        Ok(Predictions {
            scaled,
            capacity_ah: capacity,
            soh,
            rul_cycles: rul,
        })
    }
}

fn affine(w: &Matrix, b: &[f64], a: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.cols(), a.len());
    let mut out = b.to_vec();
    for (i, slot) in out.iter_mut().enumerate() {
        let row = w.row(i);
        let mut acc = 0.0;
        for (wij, aj) in row.iter().zip(a) {
            acc += wij * aj;
        }
        *slot += acc;
    }
    out
}

/// Mean squared error over all `n * d` entries.
pub fn loss_mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check_same_shape(pred, target)?;
    let n = pred.data().len();
    if n == 0 {
        return Err(Error::invalid("loss over zero entries"));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n as f64)
}

/// Mean absolute error over all `n * d` entries.
pub fn loss_mae(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check_same_shape(pred, target)?;
    let n = pred.data().len();
    if n == 0 {
        return Err(Error::invalid("loss over zero entries"));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t).abs())
        .sum();
    Ok(sum / n as f64)
}

fn check_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            what: "loss operands".to_string(),
            expected: a.data().len(),
            actual: b.data().len(),
        });
    }
    Ok(())
}

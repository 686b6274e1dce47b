//! Numerical gradient checking by central finite differences.
//!
//! This is the independent reference for [`crate::net::Network::backward`]:
//! it never touches the analytic backward path, only repeated forward passes
//! with frozen dropout masks. Used by the test suites; kept public so
//! downstream experiments can validate custom configurations.

use crate::error::Result;
use crate::net::{DropoutMasks, Gradients, Network};

/// Per-sample MSE (mean over output entries) of a training-mode forward pass
/// with the given frozen masks.
pub fn sample_loss(net: &Network, x: &[f64], target: &[f64], masks: &DropoutMasks) -> Result<f64> {
    let cache = net.forward_training(x, masks)?;
    let out = cache.output();
    let d = out.len() as f64;
    Ok(out
        .iter()
        .zip(target)
        .map(|(&o, &y)| (o - y) * (o - y))
        .sum::<f64>()
        / d)
}

/// Central-difference gradients of the per-sample loss with respect to every
/// weight and bias: `(loss(p + h) - loss(p - h)) / 2h`.
pub fn numerical_gradients(
    net: &Network,
    x: &[f64],
    target: &[f64],
    masks: &DropoutMasks,
    h: f64,
) -> Result<Gradients> {
    let mut probe = net.clone();
    let mut grads = Gradients::zeros_like(net);
    let layers = net.weights().len();
    for l in 0..layers {
        for idx in 0..net.weights()[l].data().len() {
            let original = probe.weights[l].data()[idx];
            probe.weights[l].data_mut()[idx] = original + h;
            let plus = sample_loss(&probe, x, target, masks)?;
            probe.weights[l].data_mut()[idx] = original - h;
            let minus = sample_loss(&probe, x, target, masks)?;
            probe.weights[l].data_mut()[idx] = original;
            grads.d_weights[l].data_mut()[idx] = (plus - minus) / (2.0 * h);
        }
        for idx in 0..net.biases()[l].len() {
            let original = probe.biases[l][idx];
            probe.biases[l][idx] = original + h;
            let plus = sample_loss(&probe, x, target, masks)?;
            probe.biases[l][idx] = original - h;
            let minus = sample_loss(&probe, x, target, masks)?;
            probe.biases[l][idx] = original;
            grads.d_biases[l][idx] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Worst relative disagreement between two gradient sets. Entries where both
/// magnitudes fall below `1e-6` are compared absolutely instead, so that
/// numerically-zero pairs do not blow up the ratio.
pub fn max_relative_error(analytic: &Gradients, numerical: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    let mut consider = |a: f64, n: f64| {
        let denom = a.abs().max(n.abs());
        let err = if denom < 1e-6 {
            (a - n).abs()
        } else {
            (a - n).abs() / denom
        };
        worst = worst.max(err);
    };
    for (aw, nw) in analytic.d_weights.iter().zip(&numerical.d_weights) {
        for (&a, &n) in aw.data().iter().zip(nw.data()) {
            consider(a, n);
        }
    }
    for (ab, nb) in analytic.d_biases.iter().zip(&numerical.d_biases) {
        for (&a, &n) in ab.iter().zip(nb) {
            consider(a, n);
        }
    }
    worst
}

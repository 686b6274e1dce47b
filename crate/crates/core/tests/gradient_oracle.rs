//! Analytic backpropagation against the central-difference oracle.

use cyclelife::gradcheck::{max_relative_error, numerical_gradients};
use cyclelife::net::{init_network, sample_masks, Activation, LayerSpec, NetworkSpec};
use cyclelife::rng::{mix64, Rng};

fn spec_with(activation: Activation, dropout: f64, seed: u64) -> NetworkSpec {
    NetworkSpec {
        input_dim: 5,
        layers: vec![
            LayerSpec {
                units: 10,
                activation,
            },
            LayerSpec {
                units: 7,
                activation,
            },
            LayerSpec {
                units: 3,
                activation: Activation::Identity,
            },
        ],
        dropout: vec![dropout, dropout],
        seed,
    }
}

fn check_once(activation: Activation, dropout: f64, seed: u64) -> f64 {
    let spec = spec_with(activation, dropout, seed);
    let net = init_network(&spec).unwrap();
    let mut rng = Rng::seed_from_u64(mix64(seed, 0xD15C));
    let masks = sample_masks(&spec, &mut rng);
    let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let y: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let cache = net.forward_training(&x, &masks).unwrap();
    let analytic = net.backward(&cache, &y).unwrap();
    let numerical = numerical_gradients(&net, &x, &y, &masks, 1e-5).unwrap();
    max_relative_error(&analytic, &numerical)
}

#[test]
fn every_activation_kind_matches_finite_differences() {
    for activation in [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ] {
        for seed in 0..3u64 {
            let err = check_once(activation, 0.2, seed);
            assert!(
                err < 1e-4,
                "{activation:?} seed {seed}: max relative error {err}"
            );
        }
    }
}

#[test]
fn frozen_masks_with_heavy_dropout_still_match() {
    for seed in 10..14u64 {
        let err = check_once(Activation::Tanh, 0.5, seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn no_dropout_matches_too() {
    for seed in 20..23u64 {
        let err = check_once(Activation::Relu, 0.0, seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

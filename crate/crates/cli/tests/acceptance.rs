//! Acceptance suite: one test per shipping criterion, each at its pinned
//! tolerance. Run with `cargo test -p cyclelife-cli --test acceptance`
//! (add `-- --nocapture` to see the per-criterion PASS lines).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use cyclelife::dataset::{
    parse_battery_csv, synthesize_fade_series, CycleRecord, FadeModel, FadeShape,
};
use cyclelife::eval::{grid_search, GridSpec};
use cyclelife::features::{build_supervised_set, kfold_split, SupervisedSet};
use cyclelife::gradcheck::{max_relative_error, numerical_gradients};
use cyclelife::linalg::Matrix;
use cyclelife::net::{
    adam_step, init_network, network_from_parts, sample_masks, train, Activation, AdamState,
    Gradients, LayerSpec, NetworkSpec, TrainConfig,
};
use cyclelife::rng::{mix64, Rng};

fn sample_csv_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/nasa_cycle_sample.csv")
}

fn passed(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

// --- Criterion 1: parameter-count reproduction -----------------------------

#[test]
fn criterion_01_param_count_reproduction() {
    let spec = NetworkSpec::default_with_seed(0);
    assert_eq!(spec.layer_param_counts(), vec![60, 77, 24]);
    assert_eq!(spec.param_count(), 161);
    passed(
        "criterion 1 (parameter count)",
        "5-10-7-3 stack counts 60/77/24, total 161".to_string(),
    );
}

// --- Criterion 2: gradient correctness on 25 random networks ---------------

#[test]
fn criterion_02_gradient_correctness() {
    let started = Instant::now();
    let kinds = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ];
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let activation = kinds[(seed as usize) % kinds.len()];
        let spec = NetworkSpec {
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
            dropout: vec![0.2, 0.2],
            seed,
        };
        let net = init_network(&spec).unwrap();
        let mut rng = Rng::seed_from_u64(mix64(seed, 0xACCE));
        let masks = sample_masks(&spec, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let cache = net.forward_training(&x, &masks).unwrap();
        let analytic = net.backward(&cache, &y).unwrap();
        let numerical = numerical_gradients(&net, &x, &y, &masks, 1e-5).unwrap();
        let err = max_relative_error(&analytic, &numerical);
        assert!(
            err < 1e-4,
            "net {seed} ({activation:?}): max relative error {err}"
        );
        worst = worst.max(err);
    }
    passed(
        "criterion 2 (gradient correctness)",
        format!(
            "25 nets, worst relative error {worst:.2e} < 1e-4, {:?}",
            started.elapsed()
        ),
    );
}

// --- Criterion 3: Adam sanity ----------------------------------------------

fn scalar_net(w: f64) -> cyclelife::net::Network {
    let spec = NetworkSpec {
        input_dim: 1,
        layers: vec![LayerSpec {
            units: 1,
            activation: Activation::Identity,
        }],
        dropout: vec![],
        seed: 0,
    };
    network_from_parts(
        spec,
        vec![Matrix::from_vec(1, 1, vec![w]).unwrap()],
        vec![vec![0.0]],
    )
    .unwrap()
}

#[test]
fn criterion_03_adam_sanity() {
    // First-step displacement ~= lr within 1%.
    let mut net = scalar_net(1.0);
    let mut state = AdamState::new(&net);
    let config = TrainConfig {
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let mut grads = Gradients::zeros_like(&net);
    grads.d_weights[0].set(0, 0, 2.0); // d/dw of w^2 at w = 1
    adam_step(&mut net, &mut state, &grads, &config, 1);
    let displacement = 1.0 - net.weights()[0].get(0, 0);
    assert!(
        (displacement - 0.01).abs() / 0.01 < 0.01,
        "first-step displacement {displacement}"
    );

    // f(w) = w^2 from w = 1 at lr = 0.01: |w| < 1e-3 within 2000 steps.
    let mut net = scalar_net(1.0);
    let mut state = AdamState::new(&net);
    let mut steps = None;
    for t in 1..=2000 {
        let w = net.weights()[0].get(0, 0);
        let mut grads = Gradients::zeros_like(&net);
        grads.d_weights[0].set(0, 0, 2.0 * w);
        adam_step(&mut net, &mut state, &grads, &config, t);
        if net.weights()[0].get(0, 0).abs() < 1e-3 {
            steps = Some(t);
            break;
        }
    }
    let steps = steps.expect("|w| < 1e-3 within 2000 steps");
    passed(
        "criterion 3 (Adam sanity)",
        format!("first step within 1% of lr, quadratic minimized in {steps} steps"),
    );
}

// --- Criterion 4: overfit oracle -------------------------------------------

fn overfit_fixture() -> SupervisedSet {
    let ds = synthesize_fade_series(
        &FadeModel {
            c0_ah: 2.0,
            rate: 0.02,
            noise_sigma: 0.005,
            shape: FadeShape::Linear,
            seed: 42,
        },
        16,
        "OVERFIT",
    )
    .unwrap();
    build_supervised_set(&ds, 2.0, 0.7, None).unwrap()
}

fn overfit_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.001,
        batch_size: 4,
        epochs: 600,
        seed: 11,
        ..TrainConfig::default()
    }
}

fn run_overfit() -> (cyclelife::net::Network, cyclelife::net::TrainHistory) {
    let set = overfit_fixture();
    let mut spec = NetworkSpec::default_with_seed(7);
    spec.dropout = vec![0.0, 0.0];
    let mut net = init_network(&spec).unwrap();
    let history = train(
        &mut net,
        set.features(),
        set.targets(),
        None,
        &overfit_config(),
    )
    .unwrap();
    (net, history)
}

#[test]
fn criterion_04_overfit_oracle() {
    let started = Instant::now();
    let (net_a, hist_a) = run_overfit();
    let below = hist_a
        .epochs
        .iter()
        .position(|e| e.train_loss < 1e-3)
        .map(|i| i + 1);
    let below = below.expect("train MSE < 1e-3 within 5000 epochs");
    assert!(below <= 5000);

    // Deterministic per seed.
    let (net_b, hist_b) = run_overfit();
    assert_eq!(net_a.weights(), net_b.weights());
    assert_eq!(net_a.biases(), net_b.biases());
    assert_eq!(hist_a, hist_b);
    passed(
        "criterion 4 (overfit oracle)",
        format!(
            "MSE < 1e-3 at epoch {below}, bit-identical rerun, {:?}",
            started.elapsed()
        ),
    );
}

// --- Criterion 5: synthetic end-to-end -------------------------------------

#[test]
fn criterion_05_synthetic_end_to_end() {
    let started = Instant::now();
    let ds = synthesize_fade_series(
        &FadeModel {
            c0_ah: 2.0,
            rate: 0.004,
            noise_sigma: 0.01,
            shape: FadeShape::Linear,
            seed: 1234,
        },
        200,
        "SYN1",
    )
    .unwrap();
    let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
    let grid = GridSpec {
        layer_configs: vec![vec![10, 7, 3]],
        activations: vec![Activation::Relu],
        learning_rates: vec![0.01, 0.001],
        batch_sizes: vec![16],
        epoch_counts: vec![300],
        dropout_rates: vec![0.0, 0.2],
        base_seed: 99,
    };
    let result = grid_search(
        &grid,
        &set,
        &cyclelife::features::SplitSpec::Holdout {
            test_fraction: 0.2,
            seed: 5,
        },
    )
    .unwrap();
    let best = result.best();
    let accuracy = best.accuracy.expect("best combination has a score");
    assert!(
        accuracy >= 0.95,
        "grid-selected capacity-head r2 {accuracy} < 0.95"
    );
    passed(
        "criterion 5 (synthetic end-to-end)",
        format!(
            "grid over {} combos, best capacity-head r2 {accuracy:.4} >= 0.95, {:?}",
            result.reports.len(),
            started.elapsed()
        ),
    );
}

// --- Criterion 6: bundled fixture fidelity ----------------------------------

#[test]
fn criterion_06_fixture_fidelity() {
    let text = fs::read_to_string(sample_csv_path()).unwrap();
    let ds = parse_battery_csv(&text, "sample").unwrap();
    assert_eq!(ds.len(), 24);
    let ids = ds.battery_ids();
    assert_eq!(ids, vec!["B0005", "B0006", "B0007", "B0018"]);
    for id in &ids {
        assert_eq!(ds.battery(id).len(), 6);
    }
    assert_eq!(
        ds.records()[0],
        CycleRecord {
            cycle: 0,
            time_s: 3690.234,
            voltage_v: 3.277169977,
            current_a: -0.006528351,
            temp_c: 34.23085284,
            capacity_ah: 1.856487421,
            battery_id: "B0005".to_string(),
        }
    );
    passed(
        "criterion 6 (fixture fidelity)",
        "24 rows, 4 batteries x 6 cycles, first row bit-equal".to_string(),
    );
}

// --- Criterion 7: baseline oracles ------------------------------------------

#[test]
fn criterion_07_baseline_oracles() {
    let started = Instant::now();
    // OLS recovers an exact linear map with residuals < 1e-8.
    let mut rng = Rng::seed_from_u64(606);
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect())
        .collect();
    let truth = [0.5, -1.25, 2.0, 0.0, 3.5];
    let ys: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| vec![x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.75])
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y = Matrix::from_rows(&ys).unwrap();
    let linear = cyclelife::baselines::linreg_fit(&x, &y).unwrap();
    let pred = linear.predict(&x).unwrap();
    let mut worst_residual: f64 = 0.0;
    for i in 0..x.rows() {
        worst_residual = worst_residual.max((pred.get(i, 0) - y.get(i, 0)).abs());
    }
    assert!(worst_residual < 1e-8, "OLS residual {worst_residual}");

    // Unlimited-depth tree: zero training error on unique rows.
    let tree = cyclelife::baselines::tree_fit(
        &x,
        &y,
        &cyclelife::baselines::TreeConfig {
            max_depth: usize::MAX,
            min_samples_leaf: 1,
        },
        0,
    )
    .unwrap();
    let tree_pred = tree.predict(&x).unwrap();
    for i in 0..x.rows() {
        assert_eq!(tree_pred.get(i, 0), y.get(i, 0), "tree training row {i}");
    }

    // Forest prediction equals the mean of member trees within 1e-12.
    let forest = cyclelife::baselines::forest_fit(
        &x,
        &y,
        &cyclelife::baselines::ForestConfig {
            n_trees: 9,
            seed: 17,
            ..cyclelife::baselines::ForestConfig::default()
        },
    )
    .unwrap();
    let combined = forest.predict(&x).unwrap();
    let members: Vec<Matrix> = forest
        .trees
        .iter()
        .map(|t| t.predict(&x).unwrap())
        .collect();
    let mut worst_gap: f64 = 0.0;
    for i in 0..x.rows() {
        let mean: f64 = members.iter().map(|m| m.get(i, 0)).sum::<f64>() / members.len() as f64;
        worst_gap = worst_gap.max((combined.get(i, 0) - mean).abs());
    }
    assert!(worst_gap <= 1e-12, "forest mean gap {worst_gap}");
    passed(
        "criterion 7 (baseline oracles)",
        format!(
            "OLS residual {worst_residual:.1e}, tree exact, forest gap {worst_gap:.1e}, {:?}",
            started.elapsed()
        ),
    );
}

// --- Criterion 8: cross-validation properties --------------------------------

#[test]
fn criterion_08_cross_validation_properties() {
    let started = Instant::now();
    let base = synthesize_fade_series(
        &FadeModel {
            c0_ah: 2.0,
            rate: 0.005,
            noise_sigma: 0.01,
            shape: FadeShape::Linear,
            seed: 13,
        },
        23,
        "CV",
    )
    .unwrap();
    let set = build_supervised_set(&base, 2.0, 0.7, None).unwrap();
    let folds = kfold_split(&set, 4, 2024).unwrap();

    // Partition: disjoint cover, sizes within one of each other.
    let mut seen: Vec<u32> = Vec::new();
    let mut sizes = Vec::new();
    for (train_side, val_side) in &folds {
        assert_eq!(train_side.len() + val_side.len(), set.len());
        sizes.push(val_side.len());
        seen.extend(val_side.meta().iter().map(|m| m.cycle));
    }
    seen.sort_unstable();
    assert_eq!(seen, (0..23).collect::<Vec<u32>>());
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

    // Leakage probe: corrupting validation rows leaves the train-fitted
    // normalizer and RUL denominator unchanged.
    let val_cycles: Vec<u32> = folds[0].1.meta().iter().map(|m| m.cycle).collect();
    let mut records = base.records().to_vec();
    for r in &mut records {
        if val_cycles.contains(&r.cycle) {
            r.time_s *= 1e6;
            r.voltage_v += 900.0;
            r.temp_c -= 900.0;
        }
    }
    let poisoned =
        cyclelife::dataset::BatteryDataset::from_records(records, "CV-poisoned").unwrap();
    let poisoned_set = build_supervised_set(&poisoned, 2.0, 0.7, None).unwrap();
    let poisoned_folds = kfold_split(&poisoned_set, 4, 2024).unwrap();
    assert_eq!(folds[0].0.normalizer(), poisoned_folds[0].0.normalizer());
    assert_eq!(
        folds[0].0.labels().rul_denominator,
        poisoned_folds[0].0.labels().rul_denominator
    );
    passed(
        "criterion 8 (cross-validation properties)",
        format!(
            "folds partition 23 rows (sizes {sizes:?}), leakage probe unchanged, {:?}",
            started.elapsed()
        ),
    );
}

// --- Criterion 9: determinism suite ------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cyclelife")
}

fn run_ok(args: &[&str]) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Drop the volatile fields (wall-clock timestamp and per-row wall time)
/// before byte comparison.
fn normalize_volatile(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("\"timestamp_unix_s\"") && !l.contains("\"wall_time_ms\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_09_determinism_suite() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = sample_csv_path();
    let data = data.to_str().unwrap();
    let model = dir.path().join("model.json");

    // Identical flags both times, including the output paths; the second
    // pass overwrites the first, so the runs are compared via snapshots.
    let run_all = || {
        run_ok(&[
            "train",
            "--data",
            data,
            "--out",
            model.to_str().unwrap(),
            "--curves",
            dir.path().join("curves.csv").to_str().unwrap(),
            "--epochs",
            "60",
            "--batch-size",
            "4",
            "--seed",
            "7",
        ]);
        run_ok(&[
            "grid",
            "--data",
            data,
            "--out",
            dir.path().join("grid.json").to_str().unwrap(),
            "--lrs",
            "0.01",
            "--epochs-list",
            "20,40",
            "--batch-sizes",
            "8",
            "--dropouts",
            "0",
            "--seed",
            "3",
        ]);
        run_ok(&[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--data",
            data,
            "--out",
            dir.path().join("pred.csv").to_str().unwrap(),
            "--plot",
            dir.path().join("plot.svg").to_str().unwrap(),
        ]);
    };
    let exact = ["model.json", "curves.csv", "pred.csv", "plot.svg"];
    let volatile = [
        "grid.json",
        "model.json.manifest.json",
        "grid.json.manifest.json",
        "pred.csv.manifest.json",
    ];

    run_all();
    let snapshot: Vec<(String, String)> = exact
        .iter()
        .chain(&volatile)
        .map(|name| {
            (
                name.to_string(),
                fs::read_to_string(dir.path().join(name)).unwrap(),
            )
        })
        .collect();
    run_all();
    for (name, before) in &snapshot {
        let after = fs::read_to_string(dir.path().join(name)).unwrap();
        if exact.contains(&name.as_str()) {
            assert_eq!(&after, before, "{name} not byte-identical across reruns");
        } else {
            assert_eq!(
                normalize_volatile(&after),
                normalize_volatile(before),
                "{name} differs beyond volatile fields"
            );
        }
    }
    passed(
        "criterion 9 (determinism suite)",
        format!(
            "train/grid/predict reruns byte-identical (timestamps excluded), {:?}",
            started.elapsed()
        ),
    );
}

// --- Criterion 10: curve emission --------------------------------------------

#[test]
fn criterion_10_curve_emission() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let curves = dir.path().join("curves.csv");
    run_ok(&[
        "train",
        "--data",
        sample_csv_path().to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--curves",
        curves.to_str().unwrap(),
        "--epochs",
        "200",
        "--batch-size",
        "4",
        "--seed",
        "7",
    ]);
    let text = fs::read_to_string(&curves).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss,train_mae,val_mae");
    assert_eq!(lines.len(), 201, "expected 200 epoch rows");
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0].parse::<usize>().unwrap(), i + 1, "epoch column");
        for cell in &cells[1..] {
            let v: f64 = cell.parse().expect("numeric metric");
            assert!(v.is_finite());
        }
    }

    // Smoothed (window 50) train loss is non-increasing on the overfit
    // fixture; 1e-6 slack absorbs optimizer jitter at convergence.
    let (_net, history) = run_overfit();
    let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
    let smoothed: Vec<f64> = losses
        .windows(50)
        .map(|w| w.iter().sum::<f64>() / 50.0)
        .collect();
    for pair in smoothed.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-6,
            "smoothed train loss rose: {} -> {}",
            pair[0],
            pair[1]
        );
    }
    passed(
        "criterion 10 (curve emission)",
        format!(
            "200-row curves CSV, monotone epochs, finite metrics, smoothed loss non-increasing, {:?}",
            started.elapsed()
        ),
    );
}

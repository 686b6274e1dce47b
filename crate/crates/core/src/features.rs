//! Feature engineering: SOH/RUL labeling, min-max normalization, splits.
//!
//! A [`SupervisedSet`] pairs a 5-column feature matrix (cycle, time, voltage,
//! current, temperature, each min-max scaled to [0, 1]) with a 3-column
//! target matrix (scaled capacity, SOH, scaled RUL). The set retains its raw
//! rows so that splits can re-fit normalization statistics on their training
//! side only; [`split_holdout`] and [`kfold_split`] do exactly that, which
//! keeps validation rows out of every fitted statistic by construction.

use serde::{Deserialize, Serialize};

use crate::dataset::BatteryDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Number of input feature columns: cycle, time, voltage, current, temperature.
pub const FEATURE_COUNT: usize = 5;
/// Number of target heads: scaled capacity, SOH, scaled RUL.
pub const TARGET_COUNT: usize = 3;
/// Target-head index of the scaled-capacity column.
pub const CAPACITY_HEAD: usize = 0;

/// Default rated capacity for the 2 Ah-class cells this schema describes.
pub const DEFAULT_RATED_CAPACITY_AH: f64 = 2.0;
/// Default end-of-life threshold: 70% of rated capacity.
pub const DEFAULT_EOL_THRESHOLD: f64 = 0.7;
/// Fresh cells can exceed rated capacity; the capacity head is scaled by
/// this factor after clamping so the target stays in [0, 1].
pub const CAPACITY_OVERSHOOT_FACTOR: f64 = 1.2;

/// Per-column min-max scaling statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxes: Vec<f64>,
}

/// Constants needed to turn network outputs back into physical quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScaling {
    pub rated_capacity_ah: f64,
    pub eol_threshold: f64,
    /// Max RUL observed in the rows the statistics were fitted on (>= 1).
    pub rul_denominator: f64,
    pub capacity_overshoot_factor: f64,
}

/// Per-row provenance carried alongside the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub battery_id: String,
    pub cycle: u32,
    /// True when the battery never crossed EOL and RUL was labeled against
    /// its last observed cycle instead.
    pub rul_fallback: bool,
}

/// Normalized feature/target matrices plus everything needed to rebuild them.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    raw_features: Matrix,
    raw_capacity_ah: Vec<f64>,
    raw_rul_cycles: Vec<f64>,
    features: Matrix,
    targets: Matrix,
    normalizer: Normalizer,
    labels: LabelScaling,
    meta: Vec<RowMeta>,
}

/// How to carve a supervised set for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    Holdout { test_fraction: f64, seed: u64 },
    KFold { k: usize, seed: u64 },
    LeaveOneBatteryOut,
}

/// State of health: delivered capacity over rated capacity.
pub fn compute_soh(capacity_ah: f64, rated_capacity_ah: f64) -> Result<f64> {
    if !(rated_capacity_ah > 0.0) {
        return Err(Error::invalid(format!(
            "rated capacity must be > 0, got {rated_capacity_ah}"
        )));
    }
    Ok(capacity_ah / rated_capacity_ah)
}

/// First cycle whose capacity falls strictly below `eol_threshold * rated`,
/// or `None` if the series never crosses. The series must be cycle-ascending.
pub fn compute_eol_cycle(
    series: &[(u32, f64)],
    rated_capacity_ah: f64,
    eol_threshold: f64,
) -> Result<Option<u32>> {
    if series.is_empty() {
        return Err(Error::invalid("empty capacity series"));
    }
    if !(rated_capacity_ah > 0.0) {
        return Err(Error::invalid("rated capacity must be > 0"));
    }
    let limit = eol_threshold * rated_capacity_ah;
    Ok(series
        .iter()
        .find(|(_, capacity)| *capacity < limit)
        .map(|(cycle, _)| *cycle))
}

/// Remaining useful life in cycles; zero once the battery is at or past EOL.
pub fn compute_rul(current_cycle: u32, eol_cycle: u32) -> u32 {
    eol_cycle.saturating_sub(current_cycle)
}

/// Record per-column min/max over the given rows. Callers that will later
/// score held-out rows must fit on training rows exclusively.
pub fn fit_normalizer(features: &Matrix) -> Result<Normalizer> {
    if features.rows() == 0 {
        return Err(Error::invalid("cannot fit a normalizer on zero rows"));
    }
    let mut mins = vec![f64::INFINITY; features.cols()];
    let mut maxes = vec![f64::NEG_INFINITY; features.cols()];
    for i in 0..features.rows() {
        for (j, &value) in features.row(i).iter().enumerate() {
            mins[j] = mins[j].min(value);
            maxes[j] = maxes[j].max(value);
        }
    }
    Ok(Normalizer { mins, maxes })
}

impl Normalizer {
    pub fn cols(&self) -> usize {
        self.mins.len()
    }

    /// Scale to `(x - min) / (max - min)`, clamped to [0, 1]. Degenerate
    /// columns (max == min) map to 0.
    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.cols() {
            return Err(Error::DimensionMismatch {
                what: "normalizer columns".to_string(),
                expected: self.cols(),
                actual: features.cols(),
            });
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, value) in row.iter_mut().enumerate() {
                let span = self.maxes[j] - self.mins[j];
                *value = if span > 0.0 {
                    ((*value - self.mins[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// Inverse of [`Normalizer::apply`] on non-degenerate columns.
    pub fn invert(&self, scaled: &Matrix) -> Result<Matrix> {
        if scaled.cols() != self.cols() {
            return Err(Error::DimensionMismatch {
                what: "normalizer columns".to_string(),
                expected: self.cols(),
                actual: scaled.cols(),
            });
        }
        let mut out = scaled.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, value) in row.iter_mut().enumerate() {
                let span = self.maxes[j] - self.mins[j];
                *value = if span > 0.0 {
                    self.mins[j] + *value * span
                } else {
                    self.mins[j]
                };
            }
        }
        Ok(out)
    }
}

/// Build a supervised set from a dataset.
///
/// RUL labels come from each battery's EOL crossing; batteries that never
/// cross are labeled against their last observed cycle and flagged in the
/// row meta. When `normalizer` is `None` the scaling statistics (feature
/// min/max and the RUL denominator) are fitted on these rows.
pub fn build_supervised_set(
    ds: &BatteryDataset,
    rated_capacity_ah: f64,
    eol_threshold: f64,
    normalizer: Option<&Normalizer>,
) -> Result<SupervisedSet> {
    if ds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if !(rated_capacity_ah > 0.0) {
        return Err(Error::invalid("rated capacity must be > 0"));
    }
    if !(eol_threshold > 0.0 && eol_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "EOL threshold must be in (0, 1), got {eol_threshold}"
        )));
    }

    let mut raw_rows = Vec::with_capacity(ds.len());
    let mut capacity = Vec::with_capacity(ds.len());
    let mut rul = Vec::with_capacity(ds.len());
    let mut meta = Vec::with_capacity(ds.len());

    for id in ds.battery_ids() {
        let group = ds.battery(id);
        let series: Vec<(u32, f64)> = group.iter().map(|r| (r.cycle, r.capacity_ah)).collect();
        let eol = compute_eol_cycle(&series, rated_capacity_ah, eol_threshold)?;
        let last_cycle = series.last().expect("non-empty group").0;
        let (horizon, fallback) = match eol {
            Some(cycle) => (cycle, false),
            None => (last_cycle, true),
        };
        for r in group {
            raw_rows.push(vec![
                r.cycle as f64,
                r.time_s,
                r.voltage_v,
                r.current_a,
                r.temp_c,
            ]);
            capacity.push(r.capacity_ah);
            rul.push(compute_rul(r.cycle, horizon) as f64);
            meta.push(RowMeta {
                battery_id: r.battery_id.clone(),
                cycle: r.cycle,
                rul_fallback: fallback,
            });
        }
    }

    let raw_features = Matrix::from_rows(&raw_rows)?;
    let fitted;
    let norm = match normalizer {
        Some(n) => {
            if n.cols() != FEATURE_COUNT {
                return Err(Error::DimensionMismatch {
                    what: "normalizer columns".to_string(),
                    expected: FEATURE_COUNT,
                    actual: n.cols(),
                });
            }
            n
        }
        None => {
            fitted = fit_normalizer(&raw_features)?;
            &fitted
        }
    };
    let rul_denominator = rul.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let labels = LabelScaling {
        rated_capacity_ah,
        eol_threshold,
        rul_denominator,
        capacity_overshoot_factor: CAPACITY_OVERSHOOT_FACTOR,
    };

    SupervisedSet::assemble(raw_features, capacity, rul, meta, norm.clone(), labels)
}

impl SupervisedSet {
    fn assemble(
        raw_features: Matrix,
        raw_capacity_ah: Vec<f64>,
        raw_rul_cycles: Vec<f64>,
        meta: Vec<RowMeta>,
        normalizer: Normalizer,
        labels: LabelScaling,
    ) -> Result<Self> {
        let features = normalizer.apply(&raw_features)?;
        let n = raw_features.rows();
        let mut targets = Matrix::zeros(n, TARGET_COUNT);
        for i in 0..n {
            let soh = raw_capacity_ah[i] / labels.rated_capacity_ah;
            let capacity_norm =
                soh.clamp(0.0, labels.capacity_overshoot_factor) / labels.capacity_overshoot_factor;
            let rul_norm = (raw_rul_cycles[i] / labels.rul_denominator).clamp(0.0, 1.0);
            targets.set(i, 0, capacity_norm);
            targets.set(i, 1, soh);
            targets.set(i, 2, rul_norm);
        }
        Ok(SupervisedSet {
            raw_features,
            raw_capacity_ah,
            raw_rul_cycles,
            features,
            targets,
            normalizer,
            labels,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.raw_features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scaled n x 5 feature matrix.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Scaled n x 3 target matrix (capacity, SOH, RUL heads).
    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// Unscaled n x 5 feature matrix.
    pub fn raw_features(&self) -> &Matrix {
        &self.raw_features
    }

    pub fn raw_capacity_ah(&self) -> &[f64] {
        &self.raw_capacity_ah
    }

    pub fn raw_rul_cycles(&self) -> &[f64] {
        &self.raw_rul_cycles
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn labels(&self) -> &LabelScaling {
        &self.labels
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    /// Rebuild the scaled views with externally supplied statistics (for
    /// example the ones embedded in a trained model). The rated capacity and
    /// EOL threshold must match the ones the raw labels were built with.
    pub fn rescale(&self, normalizer: &Normalizer, labels: &LabelScaling) -> Result<SupervisedSet> {
        if labels.rated_capacity_ah != self.labels.rated_capacity_ah
            || labels.eol_threshold != self.labels.eol_threshold
        {
            return Err(Error::invalid(format!(
                "label constants mismatch: set has rated={} threshold={}, got rated={} threshold={}",
                self.labels.rated_capacity_ah,
                self.labels.eol_threshold,
                labels.rated_capacity_ah,
                labels.eol_threshold
            )));
        }
        SupervisedSet::assemble(
            self.raw_features.clone(),
            self.raw_capacity_ah.clone(),
            self.raw_rul_cycles.clone(),
            self.meta.clone(),
            normalizer.clone(),
            labels.clone(),
        )
    }

    /// Raw-row subset, rescaled with the given statistics.
    fn subset_with_stats(
        &self,
        indices: &[usize],
        normalizer: Normalizer,
        labels: LabelScaling,
    ) -> Result<SupervisedSet> {
        SupervisedSet::assemble(
            self.raw_features.select_rows(indices),
            indices.iter().map(|&i| self.raw_capacity_ah[i]).collect(),
            indices.iter().map(|&i| self.raw_rul_cycles[i]).collect(),
            indices.iter().map(|&i| self.meta[i].clone()).collect(),
            normalizer,
            labels,
        )
    }

    /// Fit feature min/max and the RUL denominator on the given rows only.
    fn fit_stats_on(&self, indices: &[usize]) -> Result<(Normalizer, LabelScaling)> {
        let normalizer = fit_normalizer(&self.raw_features.select_rows(indices))?;
        let rul_denominator = indices
            .iter()
            .map(|&i| self.raw_rul_cycles[i])
            .fold(0.0f64, f64::max)
            .max(1.0);
        let labels = LabelScaling {
            rul_denominator,
            ..self.labels.clone()
        };
        Ok((normalizer, labels))
    }

    fn refit_pair(
        &self,
        train_idx: &[usize],
        test_idx: &[usize],
    ) -> Result<(SupervisedSet, SupervisedSet)> {
        let (norm, labels) = self.fit_stats_on(train_idx)?;
        let train = self.subset_with_stats(train_idx, norm.clone(), labels.clone())?;
        let test = self.subset_with_stats(test_idx, norm, labels)?;
        Ok((train, test))
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    Rng::seed_from_u64(seed).shuffle(&mut indices);
    indices
}

/// Seeded shuffle-then-split. Test size is `round(n * test_fraction)`; the
/// two sides are disjoint and jointly cover the input. Normalization and the
/// RUL denominator are re-fitted on the training side and applied to both.
pub fn split_holdout(
    set: &SupervisedSet,
    test_fraction: f64,
    seed: u64,
) -> Result<(SupervisedSet, SupervisedSet)> {
    if set.is_empty() {
        return Err(Error::invalid("cannot split an empty set"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = set.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty side for n={n}"
        )));
    }
    let shuffled = shuffled_indices(n, seed);
    let mut test_idx: Vec<usize> = shuffled[..n_test].to_vec();
    let mut train_idx: Vec<usize> = shuffled[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    let (train, test) = set.refit_pair(&train_idx, &test_idx)?;
    Ok((train, test))
}

/// Seeded k-fold partition. Validation folds are disjoint, cover every row,
/// and differ in size by at most one (the first `n mod k` folds are larger).
/// Each pair is re-normalized against its training side.
pub fn kfold_split(
    set: &SupervisedSet,
    k: usize,
    seed: u64,
) -> Result<Vec<(SupervisedSet, SupervisedSet)>> {
    let n = set.len();
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds row count {n}")));
    }
    let shuffled = shuffled_indices(n, seed);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let mut val_idx: Vec<usize> = shuffled[start..start + size].to_vec();
        let mut train_idx: Vec<usize> = shuffled[..start]
            .iter()
            .chain(&shuffled[start + size..])
            .cloned()
            .collect();
        val_idx.sort_unstable();
        train_idx.sort_unstable();
        folds.push(
            set.refit_pair(&train_idx, &val_idx)
                .map_err(|e| e.in_fold(fold))?,
        );
        start += size;
    }
    Ok(folds)
}

/// One fold per battery: validation = that battery's rows, training = the
/// rest, re-normalized against the training side. Fold order follows the
/// set's battery group order.
pub fn leave_one_battery_out(set: &SupervisedSet) -> Result<Vec<(SupervisedSet, SupervisedSet)>> {
    let mut ids: Vec<&str> = Vec::new();
    for m in set.meta() {
        if !ids.contains(&m.battery_id.as_str()) {
            ids.push(&m.battery_id);
        }
    }
    if ids.len() < 2 {
        return Err(Error::invalid(
            "leave-one-battery-out needs at least two batteries",
        ));
    }
    let mut folds = Vec::with_capacity(ids.len());
    for (fold, id) in ids.iter().enumerate() {
        let (val_idx, train_idx): (Vec<usize>, Vec<usize>) =
            (0..set.len()).partition(|&i| set.meta()[i].battery_id == *id);
        folds.push(
            set.refit_pair(&train_idx, &val_idx)
                .map_err(|e| e.in_fold(fold))?,
        );
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_battery_csv, synthesize_fade_series, FadeModel, FadeShape};

    fn sample_set() -> SupervisedSet {
        let csv = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/nasa_cycle_sample.csv"
        ))
        .unwrap();
        let ds = parse_battery_csv(&csv, "sample").unwrap();
        build_supervised_set(&ds, 2.0, 0.7, None).unwrap()
    }

    fn linear_model(rate: f64) -> FadeModel {
        FadeModel {
            c0_ah: 2.0,
            rate,
            noise_sigma: 0.0,
            shape: FadeShape::Linear,
            seed: 1,
        }
    }

    // Independent reference: scan the closed-form series directly.
    fn brute_force_eol(c0: f64, rate: f64, threshold: f64, rated: f64, n: u32) -> Option<u32> {
        let limit = threshold * rated;
        (0..n).find(|&k| c0 * (1.0 - rate * k as f64) < limit)
    }

    #[test]
    fn soh_examples() {
        assert_eq!(compute_soh(2.0, 2.0).unwrap(), 1.0);
        assert_eq!(compute_soh(1.856487421, 2.0).unwrap(), 0.9282437105);
        assert_eq!(compute_soh(1.4, 2.0).unwrap(), 0.7);
        assert!(compute_soh(1.0, 0.0).is_err());
        assert!(compute_soh(1.0, -1.0).is_err());
    }

    #[test]
    fn eol_matches_brute_force_on_linear_series() {
        // Frozen from the brute-force scan: with rate 0.0025 the capacity at
        // cycle 120 is exactly 1.4 (not strictly below), so EOL lands on 121.
        // With rate 0.005, cycle 60 already evaluates to exactly 1.4 and the
        // crossing lands on 61.
        for (rate, expected) in [(0.0025, 121u32), (0.005, 61u32)] {
            let series: Vec<(u32, f64)> = (0..400)
                .map(|k| (k, 2.0 * (1.0 - rate * k as f64)))
                .collect();
            let eol = compute_eol_cycle(&series, 2.0, 0.7).unwrap();
            assert_eq!(eol, Some(expected), "rate {rate}");
            assert_eq!(eol, brute_force_eol(2.0, rate, 0.7, 2.0, 400));
        }
    }

    #[test]
    fn eol_oracle_equivalence_on_synthetic_series() {
        for (rate, sigma, seed) in [(0.003, 0.0, 5), (0.004, 0.01, 6), (0.01, 0.02, 7)] {
            let ds = synthesize_fade_series(
                &FadeModel {
                    c0_ah: 2.0,
                    rate,
                    noise_sigma: sigma,
                    shape: FadeShape::Linear,
                    seed,
                },
                300,
                "S",
            )
            .unwrap();
            let series: Vec<(u32, f64)> = ds
                .records()
                .iter()
                .map(|r| (r.cycle, r.capacity_ah))
                .collect();
            // Brute force over the actual observations.
            let expected = series.iter().find(|(_, c)| *c < 0.7 * 2.0).map(|(k, _)| *k);
            assert_eq!(compute_eol_cycle(&series, 2.0, 0.7).unwrap(), expected);
        }
    }

    #[test]
    fn eol_never_crossing_is_none() {
        let series: Vec<(u32, f64)> = (0..50).map(|k| (k, 1.9 - 0.001 * k as f64)).collect();
        assert_eq!(compute_eol_cycle(&series, 2.0, 0.7).unwrap(), None);
    }

    #[test]
    fn eol_first_sample_already_below() {
        let series = vec![(10u32, 1.0), (11, 0.9)];
        assert_eq!(compute_eol_cycle(&series, 2.0, 0.7).unwrap(), Some(10));
    }

    #[test]
    fn eol_empty_series_is_error() {
        assert!(compute_eol_cycle(&[], 2.0, 0.7).is_err());
    }

    #[test]
    fn rul_examples() {
        assert_eq!(compute_rul(100, 100), 0);
        assert_eq!(compute_rul(20, 121), 101);
        assert_eq!(compute_rul(130, 121), 0);
    }

    #[test]
    fn rul_monotone_non_increasing() {
        let eol = 121;
        let mut prev = u32::MAX;
        for k in 0..200 {
            let r = compute_rul(k, eol);
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn normalizer_fit_examples() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let n = fit_normalizer(&m).unwrap();
        assert_eq!(n.mins, vec![1.0]);
        assert_eq!(n.maxes, vec![3.0]);

        let c = Matrix::from_rows(&[vec![5.0], vec![5.0]]).unwrap();
        let n = fit_normalizer(&c).unwrap();
        assert_eq!((n.mins[0], n.maxes[0]), (5.0, 5.0));

        let two = Matrix::from_rows(&[vec![0.0, 10.0], vec![4.0, 30.0]]).unwrap();
        let n = fit_normalizer(&two).unwrap();
        assert_eq!(n.mins, vec![0.0, 10.0]);
        assert_eq!(n.maxes, vec![4.0, 30.0]);
    }

    #[test]
    fn normalizer_apply_examples() {
        let n = Normalizer {
            mins: vec![1.0],
            maxes: vec![3.0],
        };
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let scaled = n.apply(&m).unwrap();
        assert_eq!(scaled.column(0), vec![0.0, 0.5, 1.0]);

        // Out-of-range test value clamps.
        let clamp = n.apply(&Matrix::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        assert_eq!(clamp.get(0, 0), 1.0);

        // Degenerate column maps to zero.
        let deg = Normalizer {
            mins: vec![5.0],
            maxes: vec![5.0],
        };
        let out = deg
            .apply(&Matrix::from_rows(&[vec![5.0], vec![7.0]]).unwrap())
            .unwrap();
        assert_eq!(out.column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn normalizer_dimension_mismatch() {
        let n = Normalizer {
            mins: vec![0.0, 0.0],
            maxes: vec![1.0, 1.0],
        };
        let m = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(n.apply(&m).is_err());
    }

    #[test]
    fn normalizer_round_trip_recovers_inputs() {
        let m = Matrix::from_rows(&[vec![1.5, -3.0], vec![9.25, 4.0], vec![2.0, 0.5]]).unwrap();
        let n = fit_normalizer(&m).unwrap();
        let back = n.invert(&n.apply(&m).unwrap()).unwrap();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let (a, b) = (m.get(i, j), back.get(i, j));
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn supervised_set_shapes_match_sample() {
        let set = sample_set();
        assert_eq!(set.len(), 24);
        assert_eq!(set.features().cols(), FEATURE_COUNT);
        assert_eq!(set.targets().cols(), TARGET_COUNT);
        for &v in set.features().data() {
            assert!((0.0..=1.0).contains(&v));
        }
        for i in 0..set.len() {
            let soh = set.targets().get(i, 1);
            assert!(soh > 0.0 && soh <= 1.2);
            let rul = set.targets().get(i, 2);
            assert!((0.0..=1.0).contains(&rul));
        }
    }

    #[test]
    fn supervised_rows_align_with_source() {
        let set = sample_set();
        // Same grouping order as the dataset: B0005 rows first.
        assert_eq!(set.meta()[0].battery_id, "B0005");
        assert_eq!(set.meta()[0].cycle, 0);
        assert_eq!(set.meta()[6].battery_id, "B0006");
        assert_eq!(set.raw_capacity_ah()[0], 1.856487421);
    }

    #[test]
    fn never_crossing_battery_uses_fallback_and_flags() {
        // Sample capacities never drop below 1.4, so every row is flagged.
        let set = sample_set();
        assert!(set.meta().iter().all(|m| m.rul_fallback));
        // Fallback: RUL measured against the last observed cycle (5).
        assert_eq!(set.raw_rul_cycles()[0], 5.0);
        assert_eq!(set.raw_rul_cycles()[5], 0.0);
    }

    #[test]
    fn rul_norm_affine_decreasing_on_single_battery() {
        let ds = synthesize_fade_series(&linear_model(0.001), 60, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        let col = set.targets().column(2);
        let step = col[0] - col[1];
        assert!(step > 0.0);
        for w in col.windows(2) {
            assert!(
                ((w[0] - w[1]) - step).abs() < 1e-12,
                "non-affine step {} vs {}",
                w[0] - w[1],
                step
            );
        }
    }

    #[test]
    fn rul_clamps_past_eol() {
        // rate 0.005 crosses at cycle 61 (frozen above); rows past it get 0.
        let ds = synthesize_fade_series(&linear_model(0.005), 100, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        for i in 0..set.len() {
            let cycle = set.meta()[i].cycle;
            let expected = 61.0f64 - cycle as f64;
            assert_eq!(set.raw_rul_cycles()[i], expected.max(0.0));
            assert!(!set.meta()[i].rul_fallback);
        }
    }

    #[test]
    fn build_rejects_empty_and_bad_constants() {
        let ds = synthesize_fade_series(&linear_model(0.001), 10, "S").unwrap();
        assert!(build_supervised_set(&ds, 0.0, 0.7, None).is_err());
        assert!(build_supervised_set(&ds, 2.0, 0.0, None).is_err());
        assert!(build_supervised_set(&ds, 2.0, 1.0, None).is_err());
    }

    #[test]
    fn holdout_sizes_and_determinism() {
        let ds = synthesize_fade_series(&linear_model(0.002), 10, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        let (train, test) = split_holdout(&set, 0.2, 42).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));

        let (train2, test2) = split_holdout(&set, 0.2, 42).unwrap();
        assert_eq!(train.meta(), train2.meta());
        assert_eq!(test.meta(), test2.meta());

        let sample = sample_set();
        let (tr, te) = split_holdout(&sample, 0.25, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (18, 6));
    }

    #[test]
    fn holdout_rejects_degenerate_fractions() {
        let ds = synthesize_fade_series(&linear_model(0.002), 4, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        assert!(split_holdout(&set, 0.01, 1).is_err()); // rounds to empty test
        assert!(split_holdout(&set, 0.99, 1).is_err()); // rounds to empty train
        assert!(split_holdout(&set, 0.0, 1).is_err());
        assert!(split_holdout(&set, 1.0, 1).is_err());
    }

    #[test]
    fn holdout_train_rows_scale_exactly_into_unit_interval() {
        let ds = synthesize_fade_series(
            &FadeModel {
                c0_ah: 2.0,
                rate: 0.004,
                noise_sigma: 0.01,
                shape: FadeShape::Linear,
                seed: 12,
            },
            100,
            "S",
        )
        .unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        let (train, test) = split_holdout(&set, 0.3, 9).unwrap();
        // Train side fits its own stats: min maps to 0, max to 1, per column.
        for j in 0..train.features().cols() {
            let col = train.features().column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0, "column {j}");
            assert_eq!(hi, 1.0, "column {j}");
        }
        // Test rows may clamp but stay in range.
        for &v in test.features().data() {
            assert!((0.0..=1.0).contains(&v));
        }
        // Both sides share the train-fitted statistics.
        assert_eq!(train.normalizer(), test.normalizer());
        assert_eq!(train.labels(), test.labels());
    }

    #[test]
    fn kfold_sizes() {
        let ds = synthesize_fade_series(&linear_model(0.002), 11, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        let folds = kfold_split(&set, 5, 3).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|(_, val)| val.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);

        let ds10 = synthesize_fade_series(&linear_model(0.002), 10, "S").unwrap();
        let set10 = build_supervised_set(&ds10, 2.0, 0.7, None).unwrap();
        let folds10 = kfold_split(&set10, 5, 3).unwrap();
        assert!(folds10.iter().all(|(_, val)| val.len() == 2));
    }

    #[test]
    fn kfold_validation_folds_partition_rows() {
        let ds = synthesize_fade_series(&linear_model(0.002), 23, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        let folds = kfold_split(&set, 4, 17).unwrap();
        let mut seen: Vec<u32> = Vec::new();
        for (train, val) in &folds {
            assert_eq!(train.len() + val.len(), set.len());
            seen.extend(val.meta().iter().map(|m| m.cycle));
        }
        seen.sort_unstable();
        let expected: Vec<u32> = (0..23).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let ds = synthesize_fade_series(&linear_model(0.002), 5, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        assert!(kfold_split(&set, 1, 0).is_err());
        assert!(kfold_split(&set, 6, 0).is_err());
        assert!(kfold_split(&set, 5, 0).is_ok());
    }

    #[test]
    fn leave_one_battery_out_folds_per_battery() {
        let set = sample_set();
        let folds = leave_one_battery_out(&set).unwrap();
        assert_eq!(folds.len(), 4);
        for (train, val) in &folds {
            assert_eq!(val.len(), 6);
            assert_eq!(train.len(), 18);
            let held: Vec<&str> = val.meta().iter().map(|m| m.battery_id.as_str()).collect();
            assert!(held.windows(2).all(|w| w[0] == w[1]));
            assert!(train.meta().iter().all(|m| m.battery_id != held[0]));
        }
    }

    #[test]
    fn leave_one_battery_out_needs_two_batteries() {
        let ds = synthesize_fade_series(&linear_model(0.002), 8, "S").unwrap();
        let set = build_supervised_set(&ds, 2.0, 0.7, None).unwrap();
        assert!(leave_one_battery_out(&set).is_err());
    }

    #[test]
    fn rescale_rejects_mismatched_constants() {
        let set = sample_set();
        let mut labels = set.labels().clone();
        labels.rated_capacity_ah = 3.0;
        assert!(set.rescale(set.normalizer(), &labels).is_err());
    }
}

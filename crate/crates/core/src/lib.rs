//! Battery cycle-life prognostics toolkit.
//!
//! End-to-end pipeline for lithium-ion capacity-fade data in the NASA
//! per-cycle CSV schema:
//!
//! 1. [`dataset`] — parse and validate cycle CSVs, synthesize seeded fade
//!    fixtures, partition by battery.
//! 2. [`features`] — SOH/RUL labels from capacity fade, min-max
//!    normalization fitted on training rows only, holdout/k-fold/per-battery
//!    splits.
//! 3. [`net`] — a from-scratch sequential dense network (default
//!    5 -> 10 -> 7 -> 3, 161 parameters) with inverted dropout, analytic
//!    backpropagation, and the Adam optimizer.
//! 4. [`baselines`] — linear regression, a CART regression tree, and a
//!    random forest over the same supervised sets.
//! 5. [`eval`] — metrics (the reported "accuracy" is the capacity-head
//!    r-squared), cross-validation, grid search, model comparison, and
//!    training-curve export.
//!
//! Everything stochastic flows through the pinned generator in [`rng`], so
//! a seed fully determines every artifact this crate produces.

// `!(x > 0.0)` is used instead of `x <= 0.0` so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod linalg;
pub mod model_io;
pub mod net;
pub mod rng;

pub use error::{Error, Result};

//! Ordinary least squares with a ridge fallback for singular designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, Matrix};

/// Ridge strength used when the Gram matrix is numerically singular
/// (near-constant feature columns are common in per-battery slices).
const RIDGE_LAMBDA: f64 = 1e-8;

/// Per-target coefficient vectors plus intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `coefficients[t][f]`: weight of feature `f` for target `t`.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

/// Fit one least-squares solution per target column via the normal
/// equations. A numerically singular Gram matrix falls back to ridge
/// regression with lambda = 1e-8.
pub fn linreg_fit(features: &Matrix, targets: &Matrix) -> Result<LinearModel> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit a linear model on zero rows"));
    }
    if targets.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "linear-fit targets".to_string(),
            expected: n,
            actual: targets.rows(),
        });
    }
    let f = features.cols();
    let aug = f + 1; // trailing intercept column of ones

    // Gram matrix G = A^T A for A = [X | 1].
    let mut gram = Matrix::zeros(aug, aug);
    for row in 0..n {
        let x = features.row(row);
        for i in 0..aug {
            let xi = if i < f { x[i] } else { 1.0 };
            for j in i..aug {
                let xj = if j < f { x[j] } else { 1.0 };
                let v = gram.get(i, j) + xi * xj;
                gram.set(i, j, v);
            }
        }
    }
    for i in 0..aug {
        for j in 0..i {
            gram.set(i, j, gram.get(j, i));
        }
    }

    let mut ridge = gram.clone();
    for i in 0..aug {
        ridge.set(i, i, ridge.get(i, i) + RIDGE_LAMBDA);
    }

    let mut coefficients = Vec::with_capacity(targets.cols());
    let mut intercepts = Vec::with_capacity(targets.cols());
    for t in 0..targets.cols() {
        let mut rhs = vec![0.0; aug];
        for row in 0..n {
            let y = targets.get(row, t);
            let x = features.row(row);
            for i in 0..f {
                rhs[i] += x[i] * y;
            }
            rhs[f] += y;
        }
        let beta = match solve_linear(&gram, &rhs) {
            Some(beta) => beta,
            None => solve_linear(&ridge, &rhs).ok_or_else(|| {
                Error::invalid("ridge-regularized normal equations still singular")
            })?,
        };
        coefficients.push(beta[..f].to_vec());
        intercepts.push(beta[f]);
    }
    Ok(LinearModel {
        coefficients,
        intercepts,
    })
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    pub fn n_targets(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "linear prediction features".to_string(),
                expected: self.n_features(),
                actual: features.cols(),
            });
        }
        let mut out = Matrix::zeros(features.rows(), self.n_targets());
        for i in 0..features.rows() {
            let x = features.row(i);
            for (t, (coef, &b)) in self.coefficients.iter().zip(&self.intercepts).enumerate() {
                let y: f64 = coef.iter().zip(x).map(|(&c, &xv)| c * xv).sum::<f64>() + b;
                out.set(i, t, y);
            }
        }
        Ok(out)
    }
}

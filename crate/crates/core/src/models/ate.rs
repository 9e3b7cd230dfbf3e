//! Two-group penalized-spline mean model for treatment-effect estimation.
//!
//! Covariates are `(x, I)` with `I = 1` for the placebo group and `I = 0`
//! for the treatment group. Parameters are laid out
//! `(β0, β1, β0_drug, β1_drug, u0_1..u0_K, u1_1..u1_K)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Truncated-line knots `κ_1 < … < κ_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteSpec {
    knots: Vec<f64>,
}

/// Default knot count when none is configured.
pub const DEFAULT_ATE_KNOTS: usize = 15;

impl AteSpec {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::config("/model/knots", "need at least one finite knot"));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("/model/knots", "knots must be ascending"));
        }
        Ok(Self { knots })
    }

    /// Knots at the `k / (K + 1)` empirical quantiles of `x`.
    pub fn from_quantiles(x: &[f64], count: usize) -> Result<Self> {
        if count == 0 || x.is_empty() {
            return Err(Error::config("/model/knots/K", "need K >= 1 and data"));
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let knots = (1..=count)
            .map(|k| quantile_sorted(&sorted, k as f64 / (count + 1) as f64))
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn n_params(&self) -> usize {
        4 + 2 * self.knots.len()
    }

    /// `z_k(x) = (x - κ_k)_+`.
    pub fn basis(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(move |k| (x - k).max(0.0))
    }

    /// Full design row (the model is linear in its parameters).
    pub fn design_row(&self, x: f64, group: f64) -> Vec<f64> {
        let treat = 1.0 - group;
        let mut row = Vec::with_capacity(self.n_params());
        row.extend_from_slice(&[1.0, x, treat, treat * x]);
        row.extend(self.basis(x).map(|z| group * z));
        row.extend(self.basis(x).map(|z| treat * z));
        row
    }

    /// Average treatment effect at baseline score `x`.
    pub fn ate_eval(&self, theta: &[f64], x: f64) -> f64 {
        let k = self.knots.len();
        let (u0, u1) = theta[4..].split_at(k);
        theta[2]
            + theta[3] * x
            + self
                .basis(x)
                .zip(u0.iter().zip(u1))
                .map(|(z, (a, b))| (b - a) * z)
                .sum::<f64>()
    }
}

/// Design matrices `(X, Z0, Z1)` of the two-group model.
pub fn ate_design(
    x: &[f64],
    group: &[f64],
    spec: &AteSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if x.len() != group.len() {
        return Err(Error::Shape("covariate and group lengths differ".into()));
    }
    if let Some(i) = group.iter().position(|g| *g != 0.0 && *g != 1.0) {
        return Err(Error::Shape(format!("group flag at row {i} is not 0 or 1")));
    }
    let n = x.len();
    let k = spec.knot_count();
    let xm = DMatrix::from_fn(n, 4, |i, c| {
        let treat = 1.0 - group[i];
        [1.0, x[i], treat, treat * x[i]][c]
    });
    let z0 = DMatrix::from_fn(n, k, |i, c| group[i] * (x[i] - spec.knots[c]).max(0.0));
    let z1 = DMatrix::from_fn(n, k, |i, c| (1.0 - group[i]) * (x[i] - spec.knots[c]).max(0.0));
    Ok((xm, z0, z1))
}

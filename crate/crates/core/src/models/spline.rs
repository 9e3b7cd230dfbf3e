//! Quadratic B-spline basis on equidistant knots.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K` equidistant knots on `[lo, hi]`; the basis has `K + 1` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasisSpec {
    knots: Vec<f64>,
}

impl SplineBasisSpec {
    pub fn equidistant(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 3 {
            return Err(Error::config("/model/knots/K", "at least 3 knots are required"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("/model/knots", "need finite lo < hi"));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut knots: Vec<f64> = (0..count).map(|k| lo + step * k as f64).collect();
        knots[count - 1] = hi;
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Number of basis columns, `K + 1`.
    pub fn n_basis(&self) -> usize {
        self.knots.len() + 1
    }

    /// The three nonzero entries of the basis row at `x`: the first column
    /// index `j` of the bracketing interval `[t_j, t_{j+1}]` and the values at
    /// columns `j, j+1, j+2`.
    pub fn row_entries(&self, x: f64) -> Option<(usize, [f64; 3])> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let last_interval = self.knots.len() - 2;
        let j = self
            .knots
            .partition_point(|t| *t <= x)
            .saturating_sub(1)
            .min(last_interval);
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let w = (x - t0) / (t1 - t0);
        Some((
            j,
            [(1.0 - w) * (1.0 - w) / 2.0, -(w * w) + w + 0.5, w * w / 2.0],
        ))
    }

    /// Dense basis row of length `K + 1`.
    pub fn row(&self, x: f64) -> Option<Vec<f64>> {
        let (j, vals) = self.row_entries(x)?;
        let mut row = vec![0.0; self.n_basis()];
        row[j..j + 3].copy_from_slice(&vals);
        Some(row)
    }
}

/// Evaluates the basis at every input, one row per input.
pub fn bspline_basis(x: &[f64], spec: &SplineBasisSpec) -> Result<DMatrix<f64>> {
    let mut basis = DMatrix::zeros(x.len(), spec.n_basis());
    for (i, &xi) in x.iter().enumerate() {
        let (j, vals) = spec
            .row_entries(xi)
            .ok_or(Error::OutOfRange { index: i, value: xi })?;
        for (k, v) in vals.into_iter().enumerate() {
            basis[(i, j + k)] = v;
        }
    }
    Ok(basis)
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed covariates `w` (n × d_x, possibly mismeasured) paired with
/// scalar responses `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedDataset {
    w: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Option<Vec<String>>,
}

impl ObservedDataset {
    pub fn new(w: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::EmptyTable);
        }
        if w.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "{} covariate rows but {} responses",
                w.nrows(),
                y.len()
            )));
        }
        for row in 0..w.nrows() {
            for col in 0..w.ncols() {
                if !w[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
            if !y[row].is_finite() {
                return Err(Error::NonFinite {
                    row,
                    col: w.ncols(),
                });
            }
        }
        Ok(Self {
            w,
            y,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() + 1 {
            return Err(Error::Shape(format!(
                "{} column names for {} columns",
                names.len(),
                self.dim() + 1
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Covariate dimension d_x.
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.w.row(i).iter().copied().collect()
    }

    /// Rows of the table this dataset was built from (covariates then response).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                let mut r = self.row(i);
                r.push(self.y[i]);
                r
            })
            .collect()
    }
}

/// Builds a dataset from a numeric table whose last column is the response.
pub fn validate_dataset(rows: &[Vec<f64>]) -> Result<ObservedDataset> {
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || width < 2 {
        return Err(Error::EmptyTable);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::RaggedRows {
                row,
                expected: width,
                found: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    let n = rows.len();
    let dx = width - 1;
    let w = DMatrix::from_fn(n, dx, |i, j| rows[i][j]);
    let y = DVector::from_fn(n, |i, _| rows[i][dx]);
    ObservedDataset::new(w, y)
}

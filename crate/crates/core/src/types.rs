use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centering law of the measurement error in the Dirichlet-process prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorPrior {
    /// Independent N(0, scale_k²) per covariate dimension.
    Gaussian { scale: Vec<f64> },
    /// Independent scaled Student-t per covariate dimension.
    StudentT { scale: Vec<f64>, df: f64 },
    /// δ_0: no measurement error.
    PointMass,
}

impl ErrorPrior {
    pub fn gaussian(scale: f64) -> Self {
        ErrorPrior::Gaussian { scale: vec![scale] }
    }

    pub fn student_t(df: f64, scale: f64) -> Self {
        ErrorPrior::StudentT {
            scale: vec![scale],
            df,
        }
    }

    /// Checks the prior against a covariate dimension. A scale vector of
    /// length one is broadcast; a zero entry marks an error-free column.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_scale = |scale: &[f64]| -> Result<()> {
            if scale.len() != 1 && scale.len() != dim {
                return Err(Error::config(
                    "/prior/scale",
                    format!("expected 1 or {dim} entries, got {}", scale.len()),
                ));
            }
            if scale.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::config("/prior/scale", "entries must be finite and >= 0"));
            }
            if scale.iter().all(|s| *s == 0.0) {
                return Err(Error::config(
                    "/prior/scale",
                    "at least one entry must be positive (use point_mass for no error)",
                ));
            }
            Ok(())
        };
        match self {
            ErrorPrior::Gaussian { scale } => check_scale(scale),
            ErrorPrior::StudentT { scale, df } => {
                check_scale(scale)?;
                if !(df.is_finite() && *df > 0.0) {
                    return Err(Error::config("/prior/df", "degrees of freedom must be > 0"));
                }
                Ok(())
            }
            ErrorPrior::PointMass => Ok(()),
        }
    }

    /// Scale for covariate dimension `k` (0 for the point mass).
    pub fn scale(&self, k: usize) -> f64 {
        match self {
            ErrorPrior::Gaussian { scale } | ErrorPrior::StudentT { scale, .. } => {
                if scale.len() == 1 {
                    scale[0]
                } else {
                    scale[k]
                }
            }
            ErrorPrior::PointMass => 0.0,
        }
    }
}

/// Dirichlet-process settings: concentration `c`, truncation `T`,
/// bootstrap iterations `B`, and the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub c: f64,
    pub truncation: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::config("/dp/c", "concentration must be finite and >= 0"));
        }
        if self.truncation == 0 {
            return Err(Error::config("/dp/T", "truncation must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("/dp/B", "bootstrap iterations must be >= 1"));
        }
        Ok(())
    }
}

/// RBF lengthscales of the covariate and response kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub l_x: f64,
    pub l_y: f64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_x.is_finite() && self.l_x > 0.0) {
            return Err(Error::config("/kernel/l_x", "lengthscale must be finite and > 0"));
        }
        if !(self.l_y.is_finite() && self.l_y > 0.0) {
            return Err(Error::config("/kernel/l_y", "lengthscale must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RobustTls,
    RobustMmd,
    Ols,
    TlsPlain,
    Simex,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::RobustTls => "robust_tls",
            Method::RobustMmd => "robust_mmd",
            Method::Ols => "ols",
            Method::TlsPlain => "tls_plain",
            Method::Simex => "simex",
        }
    }
}

/// Snapshot of the settings a set of samples was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: Method,
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub parameter_names: Vec<String>,
    pub dp: Option<DpConfig>,
    pub prior: Option<ErrorPrior>,
    pub kernel: Option<KernelConfig>,
}

/// A bootstrap iteration that did not produce a parameter draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub iteration: usize,
    pub reason: String,
}

/// Posterior draws, one row per successful bootstrap iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub theta: DMatrix<f64>,
    pub manifest: RunManifest,
    pub failures: Vec<RowFailure>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.nrows() == 0
    }

    pub fn n_params(&self) -> usize {
        self.theta.ncols()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.theta.row(j).iter().copied().collect()
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let b = self.len() as f64;
        (0..self.n_params())
            .map(|k| self.theta.column(k).iter().sum::<f64>() / b)
            .collect()
    }
}

//! Robust Bayesian regression with mismeasured covariates.
//!
//! Each posterior draw perturbs the observed covariates with a truncated
//! Dirichlet-process approximation and then minimizes a loss (weighted
//! total least squares or a maximum mean discrepancy) against the resulting
//! pseudo-measure. Baselines (OLS, plain TLS, SIMEX) and the theoretical
//! bound calculators live alongside.

pub mod baselines;
pub mod bootstrap;
pub mod data;
pub mod dp;
pub mod error;
pub mod mmd;
pub mod models;
pub mod optimize;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod tls;
pub mod types;

pub use data::{validate_dataset, ObservedDataset};
pub use dp::{sample_pseudo_measure, PseudoMeasure};
pub use error::{Error, Result};
pub use models::{MeanFunction, RegressionModel};
pub use types::{DpConfig, ErrorPrior, KernelConfig, Method, PosteriorSamples, RunManifest};
pub use bootstrap::{credible_band, fit, summarize, FitRequest};

//! Synthetic errors-in-variables data with known truth.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ObservedDataset;
use crate::error::{Error, Result};
use crate::models::sigmoid_model;
use crate::rng::{derive_substream, domain_seed};

const SIMULATION_DOMAIN: u64 = 0x5349_4D55_4C41_5445;

/// Default measurement-error variances for sigmoid sweeps.
pub const SIGMOID_SWEEP: [f64; 4] = [1e-8, 0.01, 0.04, 0.09];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Linear,
    Sigmoid,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Linear => "linear",
            Generator::Sigmoid => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub generator: Generator,
    pub n: usize,
    pub theta0: Vec<f64>,
    pub sigma_eps2: f64,
    pub sigma_nu2: f64,
}

impl SimulationConfig {
    /// `y = x + ε`, x equidistant on `[0, 10]`, n = 800, σ_ε² = σ_ν² = 4.
    pub fn linear_default() -> Self {
        Self {
            generator: Generator::Linear,
            n: 800,
            theta0: vec![1.0, 0.0],
            sigma_eps2: 4.0,
            sigma_nu2: 4.0,
        }
    }

    /// Falling sigmoid on `[0, 1]` with σ_ε = 0.5.
    pub fn sigmoid_default() -> Self {
        Self {
            generator: Generator::Sigmoid,
            n: 500,
            theta0: vec![0.0, 2.0, -5.0, 0.2],
            sigma_eps2: 0.25,
            sigma_nu2: 0.04,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("/n", "must be >= 2"));
        }
        let want = match self.generator {
            Generator::Linear => 2,
            Generator::Sigmoid => 4,
        };
        if self.theta0.len() != want || self.theta0.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("/theta0", format!("expected {want} finite values")));
        }
        for (field, v) in [("/sigma_eps2", self.sigma_eps2), ("/sigma_nu2", self.sigma_nu2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Everything used to generate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub generator: Generator,
    /// True covariates, one inner vector per observation.
    pub x_true: Vec<Vec<f64>>,
    pub theta0: Vec<f64>,
    pub sigma_eps: f64,
    pub sigma_nu2: f64,
    pub seed: u64,
}

impl SyntheticTruth {
    /// Noise-free mean at `x`.
    pub fn mean(&self, x: f64) -> f64 {
        match self.generator {
            Generator::Linear => self.theta0[0] * x + self.theta0[1],
            Generator::Sigmoid => sigmoid_model().eval(&self.theta0, &[x]).expect("sigmoid accepts any x"),
        }
    }
}

/// Draws a dataset. Observation `i` uses its own substream: the covariate
/// error first, then the response error.
pub fn simulate(cfg: &SimulationConfig, seed: u64) -> Result<(ObservedDataset, SyntheticTruth)> {
    cfg.validate()?;
    let n = cfg.n;
    let hi = match cfg.generator {
        Generator::Linear => 10.0,
        Generator::Sigmoid => 1.0,
    };
    let stream_seed = domain_seed(seed, SIMULATION_DOMAIN);
    let mut truth = SyntheticTruth {
        generator: cfg.generator,
        x_true: Vec::with_capacity(n),
        theta0: cfg.theta0.clone(),
        sigma_eps: cfg.sigma_eps2.sqrt(),
        sigma_nu2: cfg.sigma_nu2,
        seed,
    };
    let sd_nu = cfg.sigma_nu2.sqrt();
    let mut w = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let x = hi * i as f64 / (n - 1) as f64;
        let mut rng = derive_substream(stream_seed, 0, i as u64);
        let nu: f64 = StandardNormal.sample(&mut rng);
        let eps: f64 = StandardNormal.sample(&mut rng);
        w[(i, 0)] = if sd_nu == 0.0 { x } else { x + sd_nu * nu };
        y[i] = truth.mean(x) + truth.sigma_eps * eps;
        truth.x_true.push(vec![x]);
    }
    let data = ObservedDataset::new(w, y)?.with_column_names(vec!["w_1".into(), "y".into()])?;
    Ok((data, truth))
}

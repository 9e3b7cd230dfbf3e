//! Classical comparators: naive least squares and SIMEX.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservedDataset;
use crate::error::{Error, Result};
use crate::models::{MeanFunction, RegressionModel};
use crate::optimize::{minimize_from_starts, random_restart_init, OptimizerConfig};
use crate::rng::{derive_substream, domain_seed};
use crate::tls::ols_solve;

const SIMEX_DOMAIN: u64 = 0x5349_4D45_5800_0001;

/// Design matrix `φ(w_i)` for a model linear in θ.
pub fn design_matrix(model: &RegressionModel, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = model.n_params();
    let mut out = DMatrix::zeros(w.nrows(), p);
    for i in 0..w.nrows() {
        let x: Vec<f64> = w.row(i).iter().copied().collect();
        let row = model.features(&x).map_err(|e| match e {
            Error::OutOfRange { value, .. } => Error::OutOfRange { index: i, value },
            other => other,
        })?;
        for k in 0..p {
            out[(i, k)] = row[k];
        }
    }
    Ok(out)
}

/// Minimum-norm least-squares coefficients via the SVD pseudo-inverse.
pub fn pseudo_inverse_fit(model: &RegressionModel, data: &ObservedDataset) -> Result<Vec<f64>> {
    let x = design_matrix(model, data.w())?;
    let pinv = x
        .pseudo_inverse(1e-12)
        .map_err(|_| Error::RankDeficient)?;
    Ok((pinv * data.y()).iter().copied().collect())
}

/// Restart box used when the model does not carry one: a ±2 box around the
/// pseudo-inverse fit for models linear in θ, `[-5, 5]` per parameter for
/// the sigmoid. A learned `log σ_ε` gets `log σ_ε ± 2`.
pub fn default_bounds(model: &RegressionModel, data: &ObservedDataset) -> Result<Vec<(f64, f64)>> {
    let mut bounds = match &model.theta_bounds {
        Some(b) => b.clone(),
        None => match model.mean {
            MeanFunction::Sigmoid => vec![(-5.0, 5.0); 4],
            _ => pseudo_inverse_fit(model, data)?
                .into_iter()
                .map(|t| (t - 2.0, t + 2.0))
                .collect(),
        },
    };
    if model.learn_sigma {
        let s = model.sigma_eps.ln();
        bounds.push((s - 2.0, s + 2.0));
    }
    Ok(bounds)
}

/// Mean squared residual of the model on `(w, y)` and its gradient.
fn squared_error(model: &RegressionModel, data: &ObservedDataset, theta: &[f64]) -> (f64, Vec<f64>) {
    let n = data.len();
    let p = model.n_params();
    let mut jac = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut loss = 0.0;
    for i in 0..n {
        let x = data.row(i);
        let g = match model.eval_with_jacobian(theta, &x, &mut jac) {
            Ok(g) => g,
            Err(_) => return (f64::NAN, grad),
        };
        let r = g - data.y()[i];
        loss += r * r;
        for k in 0..p {
            grad[k] += 2.0 * r * jac[k];
        }
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    (loss * inv, grad)
}

/// Fits the model to the observed covariates as if they were exact:
/// ordinary least squares for models linear in θ, Adam on the mean squared
/// error with random restarts otherwise.
pub fn naive_fit(
    data: &ObservedDataset,
    model: &RegressionModel,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if model.is_linear_in_theta() {
        let x = design_matrix(model, data.w())?;
        return Ok(ols_solve(&x, data.y(), None)?.iter().copied().collect());
    }
    let plain = RegressionModel {
        learn_sigma: false,
        ..model.clone()
    };
    let bounds = default_bounds(&plain, data)?;
    let mut rng = derive_substream(seed, 0, data.len() as u64);
    let starts = random_restart_init(|t| squared_error(&plain, data, t).0, &bounds, cfg, &mut rng);
    Ok(minimize_from_starts(|t| squared_error(&plain, data, t), &starts, cfg)?.theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimexConfig {
    /// Assumed measurement-error variance per covariate.
    pub sigma_nu2: f64,
    pub lambda_grid: Vec<f64>,
    pub b_sim: usize,
    pub seed: u64,
}

impl Default for SimexConfig {
    fn default() -> Self {
        Self {
            sigma_nu2: 0.0,
            lambda_grid: vec![0.5, 1.0, 1.5, 2.0],
            b_sim: 100,
            seed: 0,
        }
    }
}

impl SimexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_nu2.is_finite() && self.sigma_nu2 >= 0.0) {
            return Err(Error::config("/simex/sigma_nu2", "must be finite and >= 0"));
        }
        if self.lambda_grid.is_empty()
            || self.lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0))
            || self.lambda_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::config("/simex/lambda_grid", "must be positive and strictly ascending"));
        }
        if self.b_sim == 0 {
            return Err(Error::config("/simex/b_sim", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimexResult {
    /// Extrapolated estimate at λ = -1.
    pub theta: Vec<f64>,
    /// `(λ, mean naive estimate)` including λ = 0.
    pub trajectory: Vec<(f64, Vec<f64>)>,
}

/// Least-squares quadratic through `(λ_k, v_k)` evaluated at `at`, using the
/// basis `1, (λ - center), (λ - center)²`.
pub fn quadratic_extrapolate(lambdas: &[f64], values: &[f64], at: f64, center: f64) -> Result<f64> {
    let m = lambdas.len();
    let x = DMatrix::from_fn(m, 3, |i, k| (lambdas[i] - center).powi(k as i32));
    let coef = ols_solve(&x, &DVector::from_column_slice(values), None).map_err(|e| match e {
        Error::RankDeficient => Error::ExtrapolationIllConditioned,
        other => other,
    })?;
    let u = at - center;
    Ok(coef[0] + coef[1] * u + coef[2] * u * u)
}

/// Simulation-extrapolation: refits on covariates with extra
/// `N(0, λ σ_ν²)` noise for each λ in the grid, then extrapolates each
/// parameter's mean trajectory to λ = -1 with a quadratic.
pub fn simex<F>(data: &ObservedDataset, sc: &SimexConfig, fitter: F) -> Result<SimexResult>
where
    F: Fn(&ObservedDataset) -> Result<Vec<f64>> + Sync,
{
    sc.validate()?;
    let naive = fitter(data)?;
    let p = naive.len();
    let (n, d) = (data.len(), data.dim());
    let seed = domain_seed(sc.seed, SIMEX_DOMAIN);
    let mut trajectory = vec![(0.0, naive.clone())];
    if sc.sigma_nu2 == 0.0 {
        // adding zero noise reproduces the data, so every level is the naive fit
        trajectory.extend(sc.lambda_grid.iter().map(|&l| (l, naive.clone())));
        return Ok(SimexResult { theta: naive, trajectory });
    }
    for (k, &lambda) in sc.lambda_grid.iter().enumerate() {
        let sd = (lambda * sc.sigma_nu2).sqrt();
        let fits: Vec<Result<Vec<f64>>> = (0..sc.b_sim)
            .into_par_iter()
            .map(|b| {
                let mut rng = derive_substream(seed, k as u64, b as u64);
                let mut w = data.w().clone();
                for i in 0..n {
                    for c in 0..d {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        w[(i, c)] += sd * z;
                    }
                }
                fitter(&ObservedDataset::new(w, data.y().clone())?)
            })
            .collect();
        let mut mean = vec![0.0; p];
        for fit in fits {
            for (acc, v) in mean.iter_mut().zip(fit?) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= sc.b_sim as f64);
        trajectory.push((lambda, mean));
    }
    let lambdas: Vec<f64> = trajectory.iter().map(|(l, _)| *l).collect();
    let center = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    let theta = (0..p)
        .map(|k| {
            let values: Vec<f64> = trajectory.iter().map(|(_, t)| t[k]).collect();
            if values.iter().all(|&v| v == values[0]) {
                Ok(values[0])
            } else {
                quadratic_extrapolate(&lambdas, &values, -1.0, center)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimexResult { theta, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{linear_model, sigmoid_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_linear(rng: &mut ChaCha8Rng, n: usize, sigma_nu: f64) -> ObservedDataset {
        let mut w = DMatrix::zeros(n, 1);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let nu: f64 = rng.sample(StandardNormal);
            w[(i, 0)] = x + sigma_nu * nu;
            y[i] = 2.0 * x + 1.0 + 0.3 * e;
        }
        ObservedDataset::new(w, y).unwrap()
    }

    fn ols_fitter(d: &ObservedDataset) -> Result<Vec<f64>> {
        naive_fit(d, &linear_model(1, true), &OptimizerConfig::default(), 0)
    }

    #[test]
    fn naive_linear_exact() {
        let w = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let data = ObservedDataset::new(w, y).unwrap();
        let theta = ols_fitter(&data).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-12 && (theta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn naive_linear_attenuates() {
        // slope shrinks by σ_x² / (σ_x² + σ_ν²) = 1 / 2
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let slopes: Vec<f64> = (0..50).map(|_| ols_fitter(&noisy_linear(&mut rng, 400, 1.0)).unwrap()[0]).collect();
        let mean = slopes.iter().sum::<f64>() / 50.0;
        assert!((mean - 1.0).abs() < 0.03, "mean slope {mean}");
    }

    #[test]
    fn naive_sigmoid_recovers_noiseless_curve() {
        let model = sigmoid_model();
        let truth = [0.0, 2.0, -5.0, 0.2];
        let n = 200;
        let w = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = DVector::from_fn(n, |i, _| model.eval(&truth, &[w[(i, 0)]]).unwrap());
        let data = ObservedDataset::new(w.clone(), y.clone()).unwrap();
        let cfg = OptimizerConfig {
            learning_rate: 0.02,
            max_iters: 20_000,
            patience: 2000,
            ..Default::default()
        };
        let theta = naive_fit(&data, &model, &cfg, 3).unwrap();
        let rmse = ((0..n)
            .map(|i| (model.eval(&theta, &[w[(i, 0)]]).unwrap() - y[i]).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 1e-3, "rmse {rmse}, theta {theta:?}");
    }

    #[test]
    fn simex_zero_variance_is_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let data = noisy_linear(&mut rng, 100, 0.5);
        let sc = SimexConfig {
            b_sim: 5,
            ..Default::default()
        };
        let res = simex(&data, &sc, ols_fitter).unwrap();
        let naive = ols_fitter(&data).unwrap();
        assert_eq!(res.theta, naive);
        assert!(res.trajectory.iter().all(|(_, t)| *t == naive));
    }

    #[test]
    fn simex_reduces_attenuation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut closer = 0;
        for r in 0..50 {
            let data = noisy_linear(&mut rng, 200, 0.7);
            let sc = SimexConfig {
                sigma_nu2: 0.49,
                b_sim: 20,
                seed: r,
                ..Default::default()
            };
            let res = simex(&data, &sc, ols_fitter).unwrap();
            let naive = ols_fitter(&data).unwrap();
            if (res.theta[0] - 2.0).abs() < (naive[0] - 2.0).abs() {
                closer += 1;
            }
            // the slope shrinks as more noise is added
            let slopes: Vec<f64> = res.trajectory.iter().map(|(_, t)| t[0]).collect();
            assert!(slopes.first().unwrap() > slopes.last().unwrap());
        }
        assert!(closer >= 45, "closer in {closer} of 50");
    }

    #[test]
    fn extrapolation_is_basis_invariant() {
        let lambdas = [0.0, 0.5, 1.0, 1.5, 2.0];
        let values = [1.0, 0.8, 0.67, 0.57, 0.5];
        let raw = quadratic_extrapolate(&lambdas, &values, -1.0, 0.0).unwrap();
        let centered = quadratic_extrapolate(&lambdas, &values, -1.0, 1.0).unwrap();
        assert!((raw - centered).abs() < 1e-12);
        // an exact quadratic is reproduced
        let exact: Vec<f64> = lambdas.iter().map(|l| 3.0 - l + 0.25 * l * l).collect();
        let v = quadratic_extrapolate(&lambdas, &exact, -1.0, 1.0).unwrap();
        assert!((v - 4.25).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_needs_three_levels() {
        let err = quadratic_extrapolate(&[0.0, 1.0], &[1.0, 0.5], -1.0, 0.5).unwrap_err();
        assert_eq!(err, Error::ExtrapolationIllConditioned);
        let err = quadratic_extrapolate(&[1.0, 1.0, 1.0], &[1.0, 0.5, 0.2], -1.0, 0.0).unwrap_err();
        assert_eq!(err, Error::ExtrapolationIllConditioned);
    }

    #[test]
    fn simex_config_validation() {
        let bad = SimexConfig {
            lambda_grid: vec![1.0, 0.5],
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn default_bounds_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let data = noisy_linear(&mut rng, 50, 0.1);
        let b = default_bounds(&linear_model(1, true), &data).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b[0].1 - b[0].0 - 4.0).abs() < 1e-12);
        let b = default_bounds(&sigmoid_model().with_learned_sigma(true), &data).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b[0], (-5.0, 5.0));
    }
}

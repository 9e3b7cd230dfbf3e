//! Parametric mean functions `g(θ, x)` with Gaussian response noise.

pub mod ate;
pub mod spline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use ate::{ate_design, AteSpec, DEFAULT_ATE_KNOTS};
pub use spline::{bspline_basis, SplineBasisSpec};

/// The mean-function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeanFunction {
    /// `θ_{1:d}·x (+ θ_{d+1})`.
    Linear { dim: usize, intercept: bool },
    /// `K + B / (1 + exp(A (x - m)))`, θ = (K, B, A, m).
    Sigmoid,
    /// `b(x)·u` over a quadratic B-spline basis.
    BSpline(SplineBasisSpec),
    /// Two-group truncated-line spline model over `(x, group)`.
    Ate(AteSpec),
}

/// Mean function plus response noise scale and restart box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub mean: MeanFunction,
    /// Response noise standard deviation σ_ε (initial value when learnable).
    pub sigma_eps: f64,
    /// Append `log σ_ε` to θ and learn it (MMD path only).
    pub learn_sigma: bool,
    /// Per-parameter box for restart sampling; `None` selects a default.
    pub theta_bounds: Option<Vec<(f64, f64)>>,
}

pub fn linear_model(dim: usize, with_intercept: bool) -> RegressionModel {
    assert!(dim >= 1, "linear model needs at least one covariate");
    RegressionModel::new(MeanFunction::Linear {
        dim,
        intercept: with_intercept,
    })
}

pub fn sigmoid_model() -> RegressionModel {
    RegressionModel::new(MeanFunction::Sigmoid)
}

pub fn bspline_model(spec: SplineBasisSpec) -> RegressionModel {
    RegressionModel::new(MeanFunction::BSpline(spec))
}

pub fn ate_model(spec: AteSpec) -> RegressionModel {
    RegressionModel::new(MeanFunction::Ate(spec))
}

/// Logistic `1 / (1 + e^z)` without overflow for large `|z|`.
fn logistic_neg(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl RegressionModel {
    pub fn new(mean: MeanFunction) -> Self {
        Self {
            mean,
            sigma_eps: 1.0,
            learn_sigma: false,
            theta_bounds: None,
        }
    }

    pub fn with_sigma(mut self, sigma_eps: f64) -> Self {
        self.sigma_eps = sigma_eps;
        self
    }

    pub fn with_learned_sigma(mut self, learn: bool) -> Self {
        self.learn_sigma = learn;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.theta_bounds = Some(bounds);
        self
    }

    pub fn name(&self) -> &'static str {
        match self.mean {
            MeanFunction::Linear { .. } => "linear",
            MeanFunction::Sigmoid => "sigmoid",
            MeanFunction::BSpline(_) => "bspline",
            MeanFunction::Ate(_) => "ate",
        }
    }

    /// Number of mean-function parameters p (excludes a learned σ_ε).
    pub fn n_params(&self) -> usize {
        match &self.mean {
            MeanFunction::Linear { dim, intercept } => dim + usize::from(*intercept),
            MeanFunction::Sigmoid => 4,
            MeanFunction::BSpline(spec) => spec.n_basis(),
            MeanFunction::Ate(spec) => spec.n_params(),
        }
    }

    /// Length of θ as optimized: p, plus one when σ_ε is learned.
    pub fn n_optimized(&self) -> usize {
        self.n_params() + usize::from(self.learn_sigma)
    }

    /// Covariate dimension the model expects.
    pub fn input_dim(&self) -> usize {
        match &self.mean {
            MeanFunction::Linear { dim, .. } => *dim,
            MeanFunction::Sigmoid | MeanFunction::BSpline(_) => 1,
            MeanFunction::Ate(_) => 2,
        }
    }

    /// True when `g` is linear in θ, so the Jacobian does not depend on θ.
    pub fn is_linear_in_theta(&self) -> bool {
        !matches!(self.mean, MeanFunction::Sigmoid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps.is_finite() && self.sigma_eps > 0.0) {
            return Err(Error::config("/model/sigma_eps", "must be finite and > 0"));
        }
        if let Some(b) = &self.theta_bounds {
            if b.len() != self.n_params() {
                return Err(Error::config(
                    "/model/theta_bounds",
                    format!("expected {} boxes, got {}", self.n_params(), b.len()),
                ));
            }
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(Error::config("/model/theta_bounds", "need finite lo <= hi"));
            }
        }
        Ok(())
    }

    /// `g(θ, x)`.
    pub fn eval(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        match &self.mean {
            MeanFunction::Sigmoid => {
                let s = logistic_neg(theta[2] * (x[0] - theta[3]));
                Ok(theta[0] + theta[1] * s)
            }
            _ => {
                let phi = self.features(x)?;
                Ok(phi.iter().zip(theta).map(|(a, b)| a * b).sum())
            }
        }
    }

    /// `∂g/∂θ` at `(θ, x)`, length p.
    pub fn jacobian(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_params()];
        self.eval_with_jacobian(theta, x, &mut grad)?;
        Ok(grad)
    }

    /// Evaluates `g` and writes `∂g/∂θ` into `grad`.
    pub fn eval_with_jacobian(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) -> Result<f64> {
        match &self.mean {
            MeanFunction::Sigmoid => {
                let (b, a, m) = (theta[1], theta[2], theta[3]);
                let s = logistic_neg(a * (x[0] - m));
                let ds = s * (1.0 - s);
                grad[0] = 1.0;
                grad[1] = s;
                grad[2] = -b * ds * (x[0] - m);
                grad[3] = b * ds * a;
                Ok(theta[0] + b * s)
            }
            _ => {
                let phi = self.features(x)?;
                grad.copy_from_slice(&phi);
                Ok(phi.iter().zip(theta).map(|(a, b)| a * b).sum())
            }
        }
    }

    /// Design row `φ(x)` for models linear in θ, so that `g = φ(x)·θ`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.mean {
            MeanFunction::Linear { dim, intercept } => {
                let mut row = x[..*dim].to_vec();
                if *intercept {
                    row.push(1.0);
                }
                Ok(row)
            }
            MeanFunction::BSpline(spec) => spec
                .row(x[0])
                .ok_or(Error::OutOfRange { index: 0, value: x[0] }),
            MeanFunction::Ate(spec) => Ok(spec.design_row(x[0], x[1])),
            MeanFunction::Sigmoid => Err(Error::Unsupported {
                method: "features".into(),
                model: "sigmoid".into(),
            }),
        }
    }

    /// Restart box: configured bounds if present, otherwise `fallback`.
    pub fn bounds_or(&self, fallback: impl FnOnce() -> Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        self.theta_bounds.clone().unwrap_or_else(fallback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_diff(model: &RegressionModel, theta: &[f64], x: &[f64], k: usize) -> f64 {
        let h = 1e-6 * (1.0 + theta[k].abs());
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += h;
        tm[k] -= h;
        (model.eval(&tp, x).unwrap() - model.eval(&tm, x).unwrap()) / (2.0 * h)
    }

    fn max_jacobian_error(model: &RegressionModel, draw: impl Fn(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>)) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (theta, x) = draw(&mut rng);
            let jac = model.jacobian(&theta, &x).unwrap();
            for k in 0..theta.len() {
                let num = central_diff(model, &theta, &x, k);
                let err = (jac[k] - num).abs() / (1e-12 + num.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn linear_examples() {
        let m = linear_model(1, true);
        assert_eq!(m.eval(&[1.0, 0.0], &[5.0]).unwrap(), 5.0);
        assert_eq!(m.eval(&[0.0, 0.0], &[-3.0]).unwrap(), 0.0);
        assert_eq!(m.jacobian(&[2.0, 3.0], &[4.0]).unwrap(), vec![4.0, 1.0]);
    }

    #[test]
    fn intercept_reduces_to_no_intercept() {
        let with = linear_model(2, true);
        let without = linear_model(2, false);
        let x = [0.7, -1.3];
        assert_eq!(
            with.eval(&[1.5, 2.0, 0.0], &x).unwrap(),
            without.eval(&[1.5, 2.0], &x).unwrap()
        );
    }

    #[test]
    fn sigmoid_midpoint_and_limits() {
        let m = sigmoid_model();
        let theta = [0.0, 2.0, -5.0, 0.2];
        assert!((m.eval(&theta, &[0.2]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.eval(&theta, &[1e6]).unwrap(), 2.0);
        assert_eq!(m.eval(&theta, &[-1e6]).unwrap(), 0.0);
        assert!(m.jacobian(&theta, &[1e6]).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_jacobian_at_reference_parameters() {
        let m = sigmoid_model();
        let theta = [0.0, 2.0, -5.0, 0.2];
        let x = [0.3];
        let jac = m.jacobian(&theta, &x).unwrap();
        for k in 0..4 {
            let num = central_diff(&m, &theta, &x, k);
            let rel = (jac[k] - num).abs() / (1e-12 + num.abs());
            assert!(rel < 1e-6, "component {k}: {rel}");
        }
    }

    #[test]
    fn sigmoid_monotone_when_ab_negative() {
        let m = sigmoid_model();
        let theta = [0.5, 2.0, -5.0, 0.2];
        let grid: Vec<f64> = (0..200).map(|i| -2.0 + i as f64 * 0.02).collect();
        let vals: Vec<f64> = grid.iter().map(|x| m.eval(&theta, &[*x]).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let lin = linear_model(2, true);
        assert!(max_jacobian_error(&lin, |r| {
            ((0..3).map(|_| r.gen_range(-3.0..3.0)).collect(), (0..2).map(|_| r.gen_range(-3.0..3.0)).collect())
        }) < 1e-4);
        let sig = sigmoid_model();
        assert!(max_jacobian_error(&sig, |r| {
            (
                vec![r.gen_range(-2.0..2.0), r.gen_range(-3.0..3.0), r.gen_range(-6.0..6.0), r.gen_range(-1.0..1.0)],
                vec![r.gen_range(-1.0..2.0)],
            )
        }) < 1e-4);
        let spl = bspline_model(SplineBasisSpec::equidistant(6, 0.0, 5.0).unwrap());
        assert!(max_jacobian_error(&spl, |r| {
            ((0..7).map(|_| r.gen_range(-2.0..2.0)).collect(), vec![r.gen_range(0.0..5.0)])
        }) < 1e-4);
        let ate = ate_model(AteSpec::new(vec![-1.0, 0.0, 1.0]).unwrap());
        assert!(max_jacobian_error(&ate, |r| {
            ((0..10).map(|_| r.gen_range(-2.0..2.0)).collect(), vec![r.gen_range(-2.0..2.0), f64::from(r.gen_range(0..2u8))])
        }) < 1e-4);
    }

    #[test]
    fn spline_partition_of_unity_and_zero() {
        let spec = SplineBasisSpec::equidistant(8, -1.0, 3.0).unwrap();
        let m = bspline_model(spec);
        let ones = vec![1.0; 9];
        let zeros = vec![0.0; 9];
        for i in 0..=100 {
            let x = -1.0 + 4.0 * i as f64 / 100.0;
            assert!((m.eval(&ones, &[x]).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(m.eval(&zeros, &[x]).unwrap(), 0.0);
        }
        assert!(m.eval(&ones, &[3.5]).is_err());
    }

    #[test]
    fn spline_pseudo_inverse_initializer_tracks_identity() {
        let spec = SplineBasisSpec::equidistant(10, -3.0, 12.74).unwrap();
        let w: Vec<f64> = (0..200).map(|i| -2.5 + 14.5 * i as f64 / 199.0).collect();
        let basis = bspline_basis(&w, &spec).unwrap();
        let target = nalgebra::DVector::from_column_slice(&w);
        let u = basis.clone().pseudo_inverse(1e-12).unwrap() * &target;
        let m = bspline_model(spec);
        let worst = w
            .iter()
            .map(|x| (m.eval(u.as_slice(), &[*x]).unwrap() - x).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "max residual {worst}");
    }
}

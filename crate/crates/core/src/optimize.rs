//! Adam with best-seen tracking, uniform random restarts, and a
//! finite-difference gradient checker.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub restart_candidates: usize,
    pub restart_keep: usize,
    pub grad_tol: f64,
    /// Iterations allowed without a relative improvement of 1e-10.
    pub patience: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_iters: 2000,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            restart_candidates: 100,
            restart_keep: 3,
            grad_tol: 1e-7,
            patience: 200,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("/optimizer/learning_rate", self.learning_rate),
            ("/optimizer/eps_adam", self.eps_adam),
            ("/optimizer/grad_tol", self.grad_tol),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be finite and > 0"));
            }
        }
        for (field, v) in [("/optimizer/beta1", self.beta1), ("/optimizer/beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        let counts = [
            ("/optimizer/max_iters", self.max_iters),
            ("/optimizer/restart_candidates", self.restart_candidates),
            ("/optimizer/restart_keep", self.restart_keep),
            ("/optimizer/patience", self.patience),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if self.restart_keep > self.restart_candidates {
            return Err(Error::config("/optimizer/restart_keep", "must not exceed restart_candidates"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamResult {
    /// Best θ seen, not necessarily the last iterate.
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    /// Loss at every evaluated iterate, starting with θ0.
    pub trace: Vec<f64>,
}

fn non_finite(iter: usize, theta: &[f64]) -> Error {
    Error::NonFiniteLoss {
        iter,
        theta: theta.to_vec(),
    }
}

/// Minimizes `f`, which returns the loss and its gradient.
pub fn adam_minimize<F>(mut f: F, theta0: &[f64], cfg: &OptimizerConfig) -> Result<AdamResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut m = vec![0.0; p];
    let mut v = vec![0.0; p];
    let (mut loss, mut grad) = f(&theta);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(non_finite(0, &theta));
    }
    let mut best = (loss, theta.clone());
    let mut trace = vec![loss];
    let mut stale = 0;
    let mut iterations = 0;
    let (mut b1t, mut b2t) = (1.0, 1.0);

    while iterations < cfg.max_iters {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < cfg.grad_tol {
            break;
        }
        iterations += 1;
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for k in 0..p {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            let m_hat = m[k] / (1.0 - b1t);
            let v_hat = v[k] / (1.0 - b2t);
            theta[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
        (loss, grad) = f(&theta);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(iterations, &theta));
        }
        trace.push(loss);
        if loss < best.0 - 1e-10 * best.0.abs() {
            stale = 0;
        } else {
            stale += 1;
        }
        if loss < best.0 {
            best = (loss, theta.clone());
        }
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(AdamResult {
        theta: best.1,
        loss: best.0,
        iterations,
        trace,
    })
}

/// Evaluates `loss` at `restart_candidates` uniform points of the box and
/// returns the `restart_keep` best, ascending by loss. Non-finite losses
/// rank last; ties keep candidate order.
pub fn random_restart_init<F>(
    mut loss: F,
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
    rng: &mut Substream,
) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut scored: Vec<(f64, Vec<f64>)> = (0..cfg.restart_candidates)
        .map(|_| {
            let point: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
                .collect();
            let value = loss(&point);
            (if value.is_finite() { value } else { f64::INFINITY }, point)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.into_iter().take(cfg.restart_keep).map(|(_, p)| p).collect()
}

/// Runs Adam from each start and keeps the lowest final loss, preferring
/// the earliest start on ties. Fails only if every start fails.
pub fn minimize_from_starts<F>(mut f: F, starts: &[Vec<f64>], cfg: &OptimizerConfig) -> Result<AdamResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut best: Option<AdamResult> = None;
    let mut last_err = None;
    for start in starts {
        match adam_minimize(&mut f, start, cfg) {
            Ok(res) => {
                if best.as_ref().map_or(true, |b| res.loss < b.loss) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Shape("no starting points".into())))
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences with step `h (1 + |θ_k|)`.
pub fn grad_check<F>(mut f: F, theta: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(theta);
    let mut worst = 0.0f64;
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        let step = h * (1.0 + theta[k].abs());
        probe[k] = theta[k] + step;
        let up = f(&probe).0;
        probe[k] = theta[k] - step;
        let down = f(&probe).0;
        probe[k] = theta[k];
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max((analytic[k] - numeric).abs() / (1e-12 + numeric.abs()));
    }
    worst
}

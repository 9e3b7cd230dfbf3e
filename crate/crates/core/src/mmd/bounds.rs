//! Generalisation-bound constants for RBF covariate kernels and Gaussian
//! measurement error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub c: f64,
    /// Bound on the conditional mean operator norm, Λ.
    pub lambda: f64,
    /// Covariate kernel lengthscale.
    pub l: f64,
    /// True measurement-error standard deviation.
    pub sigma1: f64,
    /// Prior measurement-error standard deviation.
    pub sigma2: f64,
    pub d: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("/n", "must be >= 1"));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::config("/c", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("/lambda", "must be finite and >= 0"));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::config("/l", "must be finite and > 0"));
        }
        for (name, s) in [("/sigma1", self.sigma1), ("/sigma2", self.sigma2)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if self.d == 0 {
            return Err(Error::config("/d", "must be >= 1"));
        }
        Ok(())
    }
}

/// Population MMD² between `N(0, σ1² I_d)` and `N(0, σ2² I_d)` under an RBF
/// kernel of lengthscale `l`, or under its square (lengthscale `l/√2`).
pub fn mmd2_gaussians(sigma1: f64, sigma2: f64, l: f64, d: usize, squared_kernel: bool) -> f64 {
    if sigma1 == sigma2 {
        return 0.0;
    }
    let lam2 = if squared_kernel { l * l / 2.0 } else { l * l };
    let half_d = d as f64 / 2.0;
    let term = |v: f64| (lam2 / (lam2 + v)).powf(half_d);
    let value = term(2.0 * sigma1 * sigma1) - 2.0 * term(sigma1 * sigma1 + sigma2 * sigma2)
        + term(2.0 * sigma2 * sigma2);
    value.max(0.0)
}

/// `(C1, C2)`: C1 is the squared-kernel MMD between the true and prior
/// error laws, C2 measures how far the true error law is from zero.
pub fn bound_constants(bi: &BoundInputs) -> (f64, f64) {
    let c1 = mmd2_gaussians(bi.sigma1, bi.sigma2, bi.l, bi.d, true).sqrt();
    let l2 = bi.l * bi.l;
    let c2_sq = 2.0 - 2.0 * (l2 / (2.0 * bi.sigma1 * bi.sigma1 + l2)).powf(bi.d as f64 / 2.0);
    (c1, c2_sq.max(0.0).sqrt())
}

/// The bound split into its sampling, prior-misspecification, and
/// measurement-error terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub c1: f64,
    pub c2: f64,
    pub sampling: f64,
    pub prior_specification: f64,
    pub me_deviation: f64,
    pub total: f64,
}

pub fn bound_breakdown(bi: &BoundInputs) -> BoundBreakdown {
    let (c1, c2) = bound_constants(bi);
    let scale = 1.0 + 2.0 * bi.lambda;
    let c = bi.c;
    // c/(c+1) written to stay finite as c grows without bound
    let prior_share = if c.is_infinite() { 1.0 } else { c / (c + 1.0) };
    let sampling = scale * (prior_share / (bi.n as f64).sqrt() + (1.0 / (c + 2.0)).sqrt());
    let prior_specification = scale * c1 * prior_share;
    let me_deviation = scale * c2 / (c + 1.0);
    BoundBreakdown {
        c1,
        c2,
        sampling,
        prior_specification,
        me_deviation,
        total: sampling + prior_specification + me_deviation,
    }
}

pub fn generalisation_bound(bi: &BoundInputs) -> f64 {
    bound_breakdown(bi).total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn inputs() -> BoundInputs {
        BoundInputs {
            n: 100,
            c: 1.0,
            lambda: 0.5,
            l: 1.0,
            sigma1: 1.0,
            sigma2: 0.5,
            d: 1,
        }
    }

    #[test]
    fn matched_priors_zero_c1() {
        let bi = BoundInputs { sigma2: 1.0, ..inputs() };
        assert_eq!(bound_constants(&bi).0, 0.0);
        assert_eq!(mmd2_gaussians(0.3, 0.3, 2.0, 3, false), 0.0);
    }

    #[test]
    fn squared_kernel_example() {
        let v = mmd2_gaussians(1.0, 0.0, 1.0, 1, true);
        let expected = (0.2f64).sqrt() - 2.0 * (1.0f64 / 3.0).sqrt() + 1.0;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.29251).abs() < 1e-5);
    }

    #[test]
    fn c2_example_and_limit() {
        let bi = BoundInputs { sigma1: 1.0, ..inputs() };
        let (_, c2) = bound_constants(&bi);
        assert!((c2 * c2 - 0.84530).abs() < 1e-5);
        let tiny = BoundInputs { sigma1: 1e-9, ..inputs() };
        assert!(bound_constants(&tiny).1 < 1e-8);
    }

    #[test]
    fn c2_bounds_expected_single_draw_mmd() {
        // E MMD²(δ_ν, δ_0) = 2 - 2 E k(ν, 0) for ν ~ N(0, 1), RBF l = 1
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                2.0 - 2.0 * (-v * v / 2.0).exp()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let (_, c2) = bound_constants(&BoundInputs { sigma1: 1.0, ..inputs() });
        // 2 - 2 sqrt(1/2) < C2², consistent with an upper bound
        assert!(mean <= c2 * c2 + 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn mmd2_gaussians_grid() {
        for s2 in [0.0, 0.3, 1.0] {
            let mut last = -1.0;
            for k in 0..20 {
                let s1 = s2 + 0.1 * k as f64;
                let v = mmd2_gaussians(s1, s2, 1.3, 2, false);
                assert!(v >= 0.0);
                assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn plug_zero_concentration() {
        let bi = BoundInputs {
            c: 0.0,
            lambda: 0.0,
            ..inputs()
        };
        let (_, c2) = bound_constants(&bi);
        assert!((generalisation_bound(&bi) - ((0.5f64).sqrt() + c2)).abs() < 1e-15);
        let vanish = BoundInputs { sigma1: 0.0, ..bi };
        assert!((generalisation_bound(&vanish) - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lambda_scales_bound() {
        let a = generalisation_bound(&inputs());
        let b = generalisation_bound(&BoundInputs { lambda: 1.0, ..inputs() });
        assert!((b / a - 3.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_in_n_and_matched_limit() {
        let mut last = f64::INFINITY;
        for n in [1, 10, 100, 1000] {
            let v = generalisation_bound(&BoundInputs { n, ..inputs() });
            assert!(v < last);
            last = v;
        }
        let bi = BoundInputs {
            c: 1e12,
            sigma2: 1.0,
            ..inputs()
        };
        let limit = 2.0 / 10.0 + 2.0 * (1.0 / (bi.c + 2.0)).sqrt();
        assert!((generalisation_bound(&bi) - limit).abs() < 1e-6);
    }

    #[test]
    fn breakdown_sums() {
        let b = bound_breakdown(&inputs());
        assert!((b.sampling + b.prior_specification + b.me_deviation - b.total).abs() < 1e-15);
    }
}

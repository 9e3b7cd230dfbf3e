//! Maximum mean discrepancy between a pseudo-measure and a Gaussian-response
//! regression model, with product RBF kernels on `(x, y)`.
//!
//! For a model `Y | x ~ N(g(θ, x), σ²)` the response expectations of the
//! RBF kernel have closed forms, so the squared MMD is a deterministic
//! double sum over atoms and its gradient follows by the chain rule.

pub mod bounds;

use std::borrow::Cow;

use rand_distr::{Distribution, StandardNormal, WeightedIndex};

use crate::dp::PseudoMeasure;
use crate::error::{Error, Result};
use crate::models::RegressionModel;
use crate::rng::Substream;
use crate::types::KernelConfig;

pub use bounds::{
    bound_breakdown, bound_constants, generalisation_bound, mmd2_gaussians, BoundBreakdown, BoundInputs,
};

pub const DEFAULT_ATOM_CAP: usize = 1024;

/// A flat weighted list of `(x, y)` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatAtoms {
    dim: usize,
    /// Row-major `M × dim`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub omega: Vec<f64>,
    gram_x: Option<(f64, Vec<f64>)>,
}

impl FlatAtoms {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.len() != y.len() * dim || omega.len() != y.len() || y.is_empty() {
            return Err(Error::Shape("flat atoms: inconsistent lengths".into()));
        }
        if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Shape("flat atoms: weights must be finite and nonnegative".into()));
        }
        Ok(Self {
            dim,
            x,
            y,
            omega,
            gram_x: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_of(&self, a: usize) -> &[f64] {
        &self.x[a * self.dim..(a + 1) * self.dim]
    }

    /// Caches `k_X` between every pair of atoms for lengthscale `l_x`.
    pub fn with_gram(mut self, l_x: f64) -> Self {
        let m = self.len();
        let mut gram = vec![1.0; m * m];
        for a in 0..m {
            for b in a + 1..m {
                let v = rbf(self.x_of(a), self.x_of(b), l_x);
                gram[a * m + b] = v;
                gram[b * m + a] = v;
            }
        }
        self.gram_x = Some((l_x, gram));
        self
    }

    /// Cached Gram matrix if it was built for `l_x`.
    pub fn gram(&self, l_x: f64) -> Option<&[f64]> {
        match &self.gram_x {
            Some((l, g)) if *l == l_x => Some(g),
            _ => None,
        }
    }

    /// Keeps atoms for which `keep` holds and renormalizes the weights.
    pub fn retain(&self, mut keep: impl FnMut(&[f64]) -> bool) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut omega = Vec::new();
        for a in 0..self.len() {
            if keep(self.x_of(a)) {
                x.extend_from_slice(self.x_of(a));
                y.push(self.y[a]);
                omega.push(self.omega[a]);
            }
        }
        let total: f64 = omega.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Shape("no atoms with positive weight remain".into()));
        }
        omega.iter_mut().for_each(|w| *w /= total);
        Self::new(self.dim, x, y, omega)
    }
}

/// Flattens a pseudo-measure into one list with weights `ξ / n`, dropping
/// zero-weight atoms.
pub fn flatten(pm: &PseudoMeasure) -> FlatAtoms {
    let inv_n = 1.0 / pm.n() as f64;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut omega = Vec::new();
    for (xa, ya, xi) in pm.atoms() {
        if xi > 0.0 {
            x.extend_from_slice(xa);
            y.push(ya);
            omega.push(xi * inv_n);
        }
    }
    FlatAtoms::new(pm.dim(), x, y, omega).expect("pseudo-measure atoms are well formed")
}

/// Multinomial resampling of `cap` atoms proportional to their weights,
/// each kept with weight `1 / cap`. Returns a copy when already small enough.
pub fn subsample_atoms(fa: &FlatAtoms, cap: usize, rng: &mut Substream) -> FlatAtoms {
    assert!(cap >= 2, "atom cap must be at least 2");
    if fa.len() <= cap {
        return fa.clone();
    }
    let dist = WeightedIndex::new(&fa.omega).expect("weights sum to a positive value");
    let mut x = Vec::with_capacity(cap * fa.dim);
    let mut y = Vec::with_capacity(cap);
    for _ in 0..cap {
        let a = dist.sample(rng);
        x.extend_from_slice(fa.x_of(a));
        y.push(fa.y[a]);
    }
    FlatAtoms::new(fa.dim, x, y, vec![1.0 / cap as f64; cap]).expect("resampled atoms are well formed")
}

/// `exp(-‖u - v‖² / (2 l²))`.
pub fn rbf(u: &[f64], v: &[f64], l: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * l * l)).exp()
}

fn rbf1(u: f64, v: f64, l: f64) -> f64 {
    (-(u - v) * (u - v) / (2.0 * l * l)).exp()
}

/// `E k(Y, y0)` for `Y ~ N(mu, σ²)` and an RBF kernel of lengthscale `l`.
pub fn gauss_cross_expectation(mu: f64, sigma: f64, y0: f64, l: f64) -> f64 {
    let big = l * l + sigma * sigma;
    (l * l / big).sqrt() * (-(mu - y0) * (mu - y0) / (2.0 * big)).exp()
}

/// `E k(Y1, Y2)` for independent `Y1 ~ N(mu1, σ²)`, `Y2 ~ N(mu2, σ²)`.
pub fn gauss_pair_expectation(mu1: f64, mu2: f64, sigma: f64, l: f64) -> f64 {
    let big = l * l + 2.0 * sigma * sigma;
    (l * l / big).sqrt() * (-(mu1 - mu2) * (mu1 - mu2) / (2.0 * big)).exp()
}

/// Squared MMD of the model against a fixed atom set, set up once per
/// bootstrap iteration and evaluated many times by the optimizer.
pub struct MmdObjective<'a> {
    model: &'a RegressionModel,
    atoms: &'a FlatAtoms,
    l_y: f64,
    /// `ω_a ω_b k_X(x_a, x_b)`, row-major `M × M`.
    w: Vec<f64>,
    data_term: f64,
    /// Design rows for models linear in θ, row-major `M × p`.
    design: Option<Vec<f64>>,
}

impl<'a> MmdObjective<'a> {
    pub fn new(model: &'a RegressionModel, atoms: &'a FlatAtoms, kc: &KernelConfig) -> Result<Self> {
        if atoms.dim() != model.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} covariates, atoms have {}",
                model.input_dim(),
                atoms.dim()
            )));
        }
        let m = atoms.len();
        let owned;
        let gram = match atoms.gram(kc.l_x) {
            Some(g) => g,
            None => {
                owned = atoms.clone().with_gram(kc.l_x).gram_x.unwrap().1;
                &owned[..]
            }
        };
        let mut w = vec![0.0; m * m];
        let mut data_term = 0.0;
        for a in 0..m {
            for b in 0..m {
                let v = atoms.omega[a] * atoms.omega[b] * gram[a * m + b];
                w[a * m + b] = v;
                data_term += v * rbf1(atoms.y[a], atoms.y[b], kc.l_y);
            }
        }
        let design = if model.is_linear_in_theta() {
            let mut rows = Vec::with_capacity(m * model.n_params());
            for a in 0..m {
                rows.extend(model.features(atoms.x_of(a))?);
            }
            Some(rows)
        } else {
            None
        };
        Ok(Self {
            model,
            atoms,
            l_y: kc.l_y,
            w,
            data_term,
            design,
        })
    }

    /// Length of θ expected by [`Self::value_and_grad`].
    pub fn n_params(&self) -> usize {
        self.model.n_optimized()
    }

    fn sigma(&self, theta: &[f64]) -> f64 {
        if self.model.learn_sigma {
            theta[self.model.n_params()].exp()
        } else {
            self.model.sigma_eps
        }
    }

    fn means_and_jacobian(&self, theta: &[f64]) -> (Vec<f64>, Cow<'_, [f64]>) {
        let m = self.atoms.len();
        let p = self.model.n_params();
        match &self.design {
            Some(rows) => {
                let g = rows
                    .chunks_exact(p)
                    .map(|r| r.iter().zip(theta).map(|(a, b)| a * b).sum())
                    .collect();
                (g, Cow::Borrowed(&rows[..]))
            }
            None => {
                let mut jac = vec![0.0; m * p];
                let g = (0..m)
                    .map(|a| {
                        self.model
                            .eval_with_jacobian(theta, self.atoms.x_of(a), &mut jac[a * p..(a + 1) * p])
                            .expect("nonlinear mean functions accept any covariate")
                    })
                    .collect();
                (g, Cow::Owned(jac))
            }
        }
    }

    /// Squared MMD and its gradient with respect to θ (and `log σ_ε` when
    /// σ_ε is learned).
    pub fn value_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let m = self.atoms.len();
        let p = self.model.n_params();
        let (g, jac) = self.means_and_jacobian(theta);
        let s = self.sigma(theta);
        let l2 = self.l_y * self.l_y;
        let lp = l2 + 2.0 * s * s;
        let lc = l2 + s * s;
        let ap = (l2 / lp).sqrt();
        let ac = (l2 / lc).sqrt();

        let mut value = self.data_term;
        let mut dg = vec![0.0; m];
        // derivatives of the pair and cross sums with respect to lp and lc
        let mut d_lp = 0.0;
        let mut d_lc = 0.0;
        for a in 0..m {
            let row = &self.w[a * m..(a + 1) * m];
            let diag = row[a] * ap;
            value += diag;
            d_lp -= diag / (2.0 * lp);
            for b in a + 1..m {
                if row[b] == 0.0 {
                    continue;
                }
                let d = g[a] - g[b];
                let e = 2.0 * row[b] * ap * (-d * d / (2.0 * lp)).exp();
                value += e;
                dg[a] -= e * d / lp;
                dg[b] += e * d / lp;
                d_lp += e * (-1.0 / (2.0 * lp) + d * d / (2.0 * lp * lp));
            }
            for b in 0..m {
                if row[b] == 0.0 {
                    continue;
                }
                let d = g[a] - self.atoms.y[b];
                let e = 2.0 * row[b] * ac * (-d * d / (2.0 * lc)).exp();
                value -= e;
                dg[a] += e * d / lc;
                d_lc -= e * (-1.0 / (2.0 * lc) + d * d / (2.0 * lc * lc));
            }
        }

        let mut grad = vec![0.0; self.n_params()];
        for a in 0..m {
            for k in 0..p {
                grad[k] += dg[a] * jac[a * p + k];
            }
        }
        if self.model.learn_sigma {
            // ∂lp/∂log σ = 4σ², ∂lc/∂log σ = 2σ²
            grad[p] = s * s * (4.0 * d_lp + 2.0 * d_lc);
        }
        (value, grad)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_and_grad(theta).0
    }
}

/// Closed-form squared MMD between the model at θ and the atoms, with its
/// gradient.
pub fn mmd2_model_vs_atoms(
    theta: &[f64],
    model: &RegressionModel,
    fa: &FlatAtoms,
    kc: &KernelConfig,
) -> Result<(f64, Vec<f64>)> {
    Ok(MmdObjective::new(model, fa, kc)?.value_and_grad(theta))
}

/// V-statistic squared MMD between two weighted samples under the product
/// kernel `k_X(x, x') k_Y(y, y')`.
pub fn mmd2_empirical(a: &FlatAtoms, b: &FlatAtoms, kc: &KernelConfig) -> f64 {
    let cross = |p: &FlatAtoms, q: &FlatAtoms| -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            for j in 0..q.len() {
                s += p.omega[i]
                    * q.omega[j]
                    * rbf(p.x_of(i), q.x_of(j), kc.l_x)
                    * rbf1(p.y[i], q.y[j], kc.l_y);
            }
        }
        s
    };
    (cross(a, a) - 2.0 * cross(a, b) + cross(b, b)).max(0.0)
}

/// Monte Carlo estimate of the model-vs-atoms squared MMD from `pairs`
/// independent pairs of model draws, with its standard error.
///
/// Each pair `(Z, Z')` contributes `k(Z, Z') - h(Z) - h(Z')`, with `h` the
/// kernel mean of the atoms; adding the exact atom-atom term gives an
/// unbiased estimate.
pub fn mmd2_monte_carlo(
    theta: &[f64],
    model: &RegressionModel,
    fa: &FlatAtoms,
    kc: &KernelConfig,
    pairs: usize,
    rng: &mut Substream,
) -> Result<(f64, f64)> {
    let dist = WeightedIndex::new(&fa.omega).map_err(|e| Error::Shape(e.to_string()))?;
    let sigma = if model.learn_sigma {
        theta[model.n_params()].exp()
    } else {
        model.sigma_eps
    };
    let mut means = Vec::with_capacity(fa.len());
    for a in 0..fa.len() {
        means.push(model.eval(theta, fa.x_of(a))?);
    }
    let mut atom_term = 0.0;
    for i in 0..fa.len() {
        for j in 0..fa.len() {
            atom_term += fa.omega[i] * fa.omega[j] * rbf(fa.x_of(i), fa.x_of(j), kc.l_x) * rbf1(fa.y[i], fa.y[j], kc.l_y);
        }
    }
    let draw = |rng: &mut Substream| -> (usize, f64) {
        let a = dist.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        (a, means[a] + sigma * z)
    };
    let h = |a: usize, y: f64| -> f64 {
        (0..fa.len())
            .map(|b| fa.omega[b] * rbf(fa.x_of(a), fa.x_of(b), kc.l_x) * rbf1(y, fa.y[b], kc.l_y))
            .sum()
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..pairs {
        let (a, ya) = draw(rng);
        let (b, yb) = draw(rng);
        let t = rbf(fa.x_of(a), fa.x_of(b), kc.l_x) * rbf1(ya, yb, kc.l_y) - h(a, ya) - h(b, yb);
        sum += t;
        sum_sq += t * t;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Ok((mean + atom_term, (var / n).sqrt()))
}

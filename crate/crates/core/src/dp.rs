//! Approximate Dirichlet-process posterior draws for the conditional
//! covariate laws, assembled into one weighted pseudo-measure per bootstrap
//! iteration.

use rand::distributions::OpenClosed01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, StudentT};

use crate::data::ObservedDataset;
use crate::rng::{derive_substream, Substream};
use crate::types::{DpConfig, ErrorPrior};

/// One bootstrap draw: for each observation `i`, `T` prior atoms
/// `w_i + ν̃_t` followed by the observation `w_i` itself, each with a
/// Dirichlet weight. Atoms of one observation are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMeasure {
    n: usize,
    truncation: usize,
    dim: usize,
    atoms_x: Vec<f64>,
    weights: Vec<f64>,
    y: Vec<f64>,
}

impl PseudoMeasure {
    /// Assembles a pseudo-measure from raw parts. `atoms_x` is laid out
    /// `[i][t][k]` and `weights` `[i][t]`, with `t = T` the observation atom.
    pub fn from_parts(
        truncation: usize,
        dim: usize,
        atoms_x: Vec<f64>,
        weights: Vec<f64>,
        y: Vec<f64>,
    ) -> Self {
        let n = y.len();
        assert_eq!(atoms_x.len(), n * (truncation + 1) * dim, "atom buffer size");
        assert_eq!(weights.len(), n * (truncation + 1), "weight buffer size");
        Self {
            n,
            truncation,
            dim,
            atoms_x,
            weights,
            y,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Atoms per observation, `T + 1`.
    pub fn atoms_per_obs(&self) -> usize {
        self.truncation + 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.atoms_per_obs() + t) * self.dim;
        &self.atoms_x[start..start + self.dim]
    }

    pub fn weight(&self, i: usize, t: usize) -> f64 {
        self.weights[i * self.atoms_per_obs() + t]
    }

    /// The `T + 1` weights of observation `i`.
    pub fn weights_of(&self, i: usize) -> &[f64] {
        let k = self.atoms_per_obs();
        &self.weights[i * k..(i + 1) * k]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Iterates `(x, y, ξ)` over every atom in storage order.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64, f64)> + '_ {
        let k = self.atoms_per_obs();
        self.atoms_x
            .chunks_exact(self.dim)
            .zip(self.weights.iter())
            .enumerate()
            .map(move |(a, (x, &xi))| (x, self.y[a / k], xi))
    }
}

/// Draws `count` i.i.d. error vectors from the prior, row-major `count × dim`.
pub fn sample_error(prior: &ErrorPrior, count: usize, dim: usize, rng: &mut Substream) -> Vec<f64> {
    let mut out = vec![0.0; count * dim];
    match prior {
        ErrorPrior::PointMass => {}
        ErrorPrior::Gaussian { .. } => {
            for row in out.chunks_exact_mut(dim) {
                for (k, v) in row.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = prior.scale(k) * z;
                }
            }
        }
        ErrorPrior::StudentT { df, .. } => {
            let t = StudentT::new(*df).expect("validated degrees of freedom");
            for row in out.chunks_exact_mut(dim) {
                for (k, v) in row.iter_mut().enumerate() {
                    *v = prior.scale(k) * t.sample(rng);
                }
            }
        }
    }
    out
}

/// log of a Gamma(shape, 1) draw. Shapes below one use the boosting identity
/// `G(a) = G(a + 1) · U^{1/a}` evaluated in log space, so draws far below
/// the smallest positive double are still representable.
pub fn sample_log_gamma(shape: f64, rng: &mut Substream) -> f64 {
    debug_assert!(shape > 0.0);
    if shape == 1.0 {
        let e: f64 = rng.sample(Exp1);
        e.ln()
    } else if shape > 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.sample(OpenClosed01);
        g.ln() + u.ln() / shape
    }
}

/// Draws from Dirichlet(c/T, …, c/T, 1), a vector of length `T + 1`.
/// Components with zero concentration are exactly zero.
pub fn sample_dirichlet_weights(c: f64, truncation: usize, rng: &mut Substream) -> Vec<f64> {
    let mut out = vec![0.0; truncation + 1];
    dirichlet_into(c, truncation, rng, &mut out);
    out
}

fn dirichlet_into(c: f64, truncation: usize, rng: &mut Substream, out: &mut [f64]) {
    let shape = c / truncation as f64;
    let last = truncation;
    if shape > 0.0 {
        for v in out[..last].iter_mut() {
            *v = sample_log_gamma(shape, rng);
        }
    }
    out[last] = sample_log_gamma(1.0, rng);
    if shape <= 0.0 {
        out[..last].fill(0.0);
        out[last] = 1.0;
        return;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Draws the iteration-`j` pseudo-measure. Observation `i` uses substream
/// `(seed, j, i)`: first the `T` error draws, then the Dirichlet weights.
pub fn sample_pseudo_measure(
    data: &ObservedDataset,
    prior: &ErrorPrior,
    dp: &DpConfig,
    j: usize,
) -> PseudoMeasure {
    let n = data.len();
    let dim = data.dim();
    let t_count = dp.truncation;
    let per_obs = t_count + 1;
    let mut atoms_x = Vec::with_capacity(n * per_obs * dim);
    let mut weights = vec![0.0; n * per_obs];
    for i in 0..n {
        let mut rng = derive_substream(dp.seed, j as u64, i as u64);
        let errors = sample_error(prior, t_count, dim, &mut rng);
        let w_i = data.row(i);
        for nu in errors.chunks_exact(dim) {
            atoms_x.extend(w_i.iter().zip(nu).map(|(w, e)| w + e));
        }
        atoms_x.extend_from_slice(&w_i);
        dirichlet_into(dp.c, t_count, &mut rng, &mut weights[i * per_obs..(i + 1) * per_obs]);
    }
    PseudoMeasure {
        n,
        truncation: t_count,
        dim,
        atoms_x,
        weights,
        y: data.y().iter().copied().collect(),
    }
}

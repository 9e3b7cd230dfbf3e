//! Ordinary, total, and weighted total least squares.
//!
//! The TLS estimate comes from the right singular vector of the smallest
//! singular value of the augmented matrix `D = [X y]`: writing that vector
//! as `(v12, v22)`, the slope is `-v12 / v22`. Tall matrices are first
//! reduced to their `(d+1) × (d+1)` triangular factor, which has the same
//! singular values and right singular vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dp::PseudoMeasure;
use crate::error::{Error, Result};

/// Relative singular-value gap below which the solution is not unique.
pub const GAP_TOL: f64 = 1e-10;
/// Smallest admissible `|V22|`.
pub const V22_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsSolution {
    /// Slopes, followed by the intercept when one was requested.
    pub theta: Vec<f64>,
    /// `σ_d - σ_{d+1}` of the (centered, weighted) augmented matrix.
    pub sigma_gap: f64,
    /// Profile objective at `theta`, weighted as the rows were.
    pub objective: f64,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
}

/// Weighted least squares via Householder QR of the row-scaled system.
pub fn ols_solve(x: &DMatrix<f64>, y: &DVector<f64>, weights: Option<&[f64]>) -> Result<DVector<f64>> {
    let (n, d) = x.shape();
    if y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Shape("ols_solve: row counts differ".into()));
    }
    if n < d || d == 0 {
        return Err(Error::RankDeficient);
    }
    let mut a = x.clone();
    let mut b = y.clone();
    if let Some(w) = weights {
        for (i, &wi) in w.iter().enumerate() {
            if !(wi.is_finite() && wi >= 0.0) {
                return Err(Error::Shape(format!("weight {i} is negative or non-finite")));
            }
            let s = wi.sqrt();
            a.row_mut(i).scale_mut(s);
            b[i] *= s;
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * max_diag) {
        return Err(Error::RankDeficient);
    }
    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, d).into_owned();
    r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)
}

/// `Σ (y_i - θ·x_i)² / (1 + ‖θ‖²)`: the TLS objective with the covariate
/// perturbations minimized out.
pub fn tls_profile_objective(theta: &[f64], x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let denom = 1.0 + theta.iter().map(|t| t * t).sum::<f64>();
    (0..x.nrows())
        .map(|i| {
            let fit: f64 = x.row(i).iter().zip(theta).map(|(a, b)| a * b).sum();
            (y[i] - fit).powi(2)
        })
        .sum::<f64>()
        / denom
}

/// Weighted profile objective of a pseudo-measure,
/// `(1/n) Σ_i Σ_t ξ_t^i (y_i - θ·x̃_t^i - b)² / (1 + ‖θ‖²)`, where `b` is
/// the trailing intercept when `with_intercept` is set.
pub fn weighted_tls_objective(theta: &[f64], pm: &PseudoMeasure, with_intercept: bool) -> f64 {
    let d = pm.dim();
    let (slope, intercept) = if with_intercept {
        (&theta[..d], theta[d])
    } else {
        (&theta[..d], 0.0)
    };
    let denom = 1.0 + slope.iter().map(|t| t * t).sum::<f64>();
    pm.atoms()
        .map(|(x, y, xi)| {
            let fit: f64 = x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>() + intercept;
            xi * (y - fit).powi(2)
        })
        .sum::<f64>()
        / (denom * pm.n() as f64)
}

/// Plain TLS on `[X y]`. With an intercept, the constant column is treated
/// as error-free by centering before the decomposition.
pub fn tls_solve(x: &DMatrix<f64>, y: &DVector<f64>, with_intercept: bool) -> Result<TlsSolution> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Shape("tls_solve: row counts differ".into()));
    }
    let mut rows = Vec::with_capacity(n * d);
    for i in 0..n {
        rows.extend(x.row(i).iter());
    }
    solve_weighted_rows(&rows, y.as_slice(), &vec![1.0; n], d, with_intercept)
}

/// TLS on the weighted atoms of a pseudo-measure.
///
/// Each atom with weight `ξ > 0` becomes the row `√ξ · [x̃, y]`; zero-weight
/// atoms are dropped. Rows carry `√ξ` rather than `√(ξ/n)`: the common
/// factor `√n` rescales every singular value and leaves θ unchanged.
pub fn weighted_tls_solve(pm: &PseudoMeasure, with_intercept: bool) -> Result<TlsSolution> {
    let d = pm.dim();
    let mut rows = Vec::with_capacity(pm.n() * pm.atoms_per_obs() * d);
    let mut ys = Vec::with_capacity(pm.n() * pm.atoms_per_obs());
    let mut ws = Vec::with_capacity(pm.n() * pm.atoms_per_obs());
    for (x, y, xi) in pm.atoms() {
        if xi > 0.0 {
            rows.extend_from_slice(x);
            ys.push(y);
            ws.push(xi);
        }
    }
    let mut sol = solve_weighted_rows(&rows, &ys, &ws, d, with_intercept)?;
    sol.objective = weighted_tls_objective(&sol.theta, pm, with_intercept);
    Ok(sol)
}

/// Shared solver over row-major covariates with nonnegative row weights.
fn solve_weighted_rows(
    rows: &[f64],
    y: &[f64],
    weights: &[f64],
    d: usize,
    with_intercept: bool,
) -> Result<TlsSolution> {
    let m = y.len();
    if m <= d {
        return Err(Error::Shape(format!("TLS needs more than {d} rows, got {m}")));
    }
    let (x_mean, y_mean) = if with_intercept {
        let total: f64 = weights.iter().sum();
        let mut xm = vec![0.0; d];
        let mut ym = 0.0;
        for ((row, &yi), &w) in rows.chunks_exact(d).zip(y).zip(weights) {
            for (acc, v) in xm.iter_mut().zip(row) {
                *acc += w * v;
            }
            ym += w * yi;
        }
        xm.iter_mut().for_each(|v| *v /= total);
        (xm, ym / total)
    } else {
        (vec![0.0; d], 0.0)
    };

    let mut aug = DMatrix::zeros(m, d + 1);
    for (i, ((row, &yi), &w)) in rows.chunks_exact(d).zip(y).zip(weights).enumerate() {
        let s = w.sqrt();
        for k in 0..d {
            aug[(i, k)] = s * (row[k] - x_mean[k]);
        }
        aug[(i, d)] = s * (yi - y_mean);
    }
    let square = if m > d + 1 { aug.qr().r() } else { aug };

    let svd = square.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    if sv.len() < d + 1 {
        return Err(Error::NonUnique { gap: 0.0 });
    }
    let gap = sv[d - 1] - sv[d];
    if gap <= GAP_TOL * sv[0] {
        return Err(Error::NonUnique { gap });
    }
    let smallest = v_t.row(order[d]);
    let v22 = smallest[d];
    if v22.abs() <= V22_TOL {
        return Err(Error::Degenerate { v22 });
    }
    let mut theta: Vec<f64> = (0..d).map(|k| -smallest[k] / v22).collect();

    let denom = 1.0 + theta.iter().map(|t| t * t).sum::<f64>();
    let mut objective = 0.0;
    for ((row, &yi), &w) in rows.chunks_exact(d).zip(y).zip(weights) {
        let fit: f64 = row
            .iter()
            .zip(&x_mean)
            .zip(&theta)
            .map(|((v, mu), t)| (v - mu) * t)
            .sum();
        objective += w * (yi - y_mean - fit).powi(2);
    }
    objective /= denom;

    if with_intercept {
        let b = y_mean - theta.iter().zip(&x_mean).map(|(t, mu)| t * mu).sum::<f64>();
        theta.push(b);
    }
    Ok(TlsSolution {
        theta,
        sigma_gap: gap,
        objective,
        singular_values: sv,
    })
}

/// Evaluates the TLS objective and the Gaussian joint negative
/// log-likelihood of `(w, y)` given true covariates `x = w + ν`, with unit
/// noise scales. Under those scales `nll = n·(d+1)/2·log(2π) + tls / 2`.
pub fn tls_nll_equivalence_check(
    theta: &[f64],
    nu: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> (f64, f64) {
    let (n, d) = x.shape();
    let mut tls = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for k in 0..d {
            let nu_ik = nu[(i, k)];
            tls += nu_ik * nu_ik;
            fit += theta[k] * (x[(i, k)] + nu_ik);
        }
        tls += (y[i] - fit).powi(2);
    }

    let log_norm = |v: f64, mean: f64| -> f64 {
        0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * (v - mean).powi(2)
    };
    let mut nll = 0.0;
    for i in 0..n {
        let truth: Vec<f64> = (0..d).map(|k| x[(i, k)] + nu[(i, k)]).collect();
        for k in 0..d {
            nll += log_norm(x[(i, k)], truth[k]);
        }
        let mean: f64 = truth.iter().zip(theta).map(|(a, b)| a * b).sum();
        nll += log_norm(y[i], mean);
    }
    (tls, nll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_dataset;
    use crate::dp::sample_pseudo_measure;
    use crate::types::{DpConfig, ErrorPrior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn ols_exact_fit() {
        let theta = ols_solve(&col(&[1.0, 2.0, 3.0]), &DVector::from_vec(vec![2.0, 4.0, 6.0]), None).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ols_zero_weight_drops_row() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 100.0]);
        let theta = ols_solve(&x, &y, Some(&[1.0, 1.0, 0.0])).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-12 && (theta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(50, |_, _| rng.gen_range(-1.0..1.0));
        let theta = ols_solve(&x, &y, None).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.cholesky().unwrap().solve(&(x.transpose() * &y));
        assert!((theta - oracle).amax() < 1e-10);
    }

    #[test]
    fn ols_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(ols_solve(&x, &y, None), Err(Error::RankDeficient));
    }

    #[test]
    fn tls_noiseless_line() {
        let sol = tls_solve(&col(&[0.0, 1.0, 2.0]), &DVector::from_vec(vec![0.0, 1.0, 2.0]), false).unwrap();
        assert!((sol.theta[0] - 1.0).abs() < 1e-12);
        assert!(sol.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn tls_identity_is_not_unique() {
        let res = tls_solve(&col(&[1.0, 0.0]), &DVector::from_vec(vec![0.0, 1.0]), false);
        assert!(matches!(res, Err(Error::NonUnique { .. })), "{res:?}");
    }

    #[test]
    fn tls_vertical_line_is_degenerate() {
        // all covariates equal: the best line is vertical
        let res = tls_solve(&col(&[1.0, 1.0, 1.0]), &DVector::from_vec(vec![0.0, 5.0, -5.0]), false);
        assert!(matches!(res, Err(Error::Degenerate { .. })), "{res:?}");
    }

    fn grid_argmin(f: impl Fn(f64) -> f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=10_000 {
            let t = -5.0 + k as f64 * 1e-3;
            let v = f(t);
            if v < best.0 {
                best = (v, t);
            }
        }
        best.1
    }

    #[test]
    fn tls_matches_profile_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let slope = rng.gen_range(-3.0..3.0);
            let x = DMatrix::from_fn(30, 1, |_, _| rng.gen_range(-2.0..2.0));
            let y = DVector::from_fn(30, |i, _| slope * x[(i, 0)] + rng.gen_range(-0.3..0.3));
            let sol = tls_solve(&x, &y, false).unwrap();
            let oracle = grid_argmin(|t| tls_profile_objective(&[t], &x, &y));
            assert!((sol.theta[0] - oracle).abs() <= 1e-3, "{} vs {oracle}", sol.theta[0]);
        }
    }

    #[test]
    fn profile_objective_examples() {
        let x = col(&[1.0, 2.0]);
        let y = DVector::from_vec(vec![3.0, 6.0]);
        assert_eq!(tls_profile_objective(&[3.0], &x, &y), 0.0);
        assert_eq!(tls_profile_objective(&[0.0], &x, &y), 45.0);
    }

    #[test]
    fn tls_is_locally_optimal_and_beats_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.gen_range(-2.0..2.0));
        let y = DVector::from_fn(40, |i, _| 1.5 * x[(i, 0)] - 0.5 * x[(i, 1)] + rng.gen_range(-0.5..0.5));
        let sol = tls_solve(&x, &y, false).unwrap();
        let best = tls_profile_objective(&sol.theta, &x, &y);
        assert!((best - sol.objective).abs() < 1e-10 * (1.0 + best));
        for _ in 0..100 {
            let probe: Vec<f64> = sol.theta.iter().map(|t| t + rng.gen_range(-0.05..0.05)).collect();
            assert!(best <= tls_profile_objective(&probe, &x, &y));
        }
        let ols = ols_solve(&x, &y, None).unwrap();
        assert!(best <= tls_profile_objective(ols.as_slice(), &x, &y));
    }

    #[test]
    fn tls_recovers_noiseless_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(25, 3, |_, _| rng.gen_range(-2.0..2.0));
        let truth = [0.5, -1.25, 2.0];
        let y = DVector::from_fn(25, |i, _| (0..3).map(|k| truth[k] * x[(i, k)]).sum::<f64>() + 0.75);
        let sol = tls_solve(&x, &y, true).unwrap();
        for k in 0..3 {
            assert!((sol.theta[k] - truth[k]).abs() < 1e-10);
        }
        assert!((sol.theta[3] - 0.75).abs() < 1e-10);
    }

    fn toy() -> crate::data::ObservedDataset {
        validate_dataset(&[
            vec![0.0, 0.2],
            vec![1.0, 1.1],
            vec![2.0, 2.3],
            vec![3.0, 2.8],
            vec![4.0, 4.1],
        ])
        .unwrap()
    }

    #[test]
    fn zero_concentration_equals_plain_tls_bitwise() {
        let data = toy();
        let dp = DpConfig {
            c: 0.0,
            truncation: 7,
            iterations: 1,
            seed: 1,
        };
        let pm = sample_pseudo_measure(&data, &ErrorPrior::gaussian(1.0), &dp, 0);
        for intercept in [false, true] {
            let a = weighted_tls_solve(&pm, intercept).unwrap();
            let b = tls_solve(data.w(), data.y(), intercept).unwrap();
            assert_eq!(a.theta, b.theta);
        }
    }

    #[test]
    fn uniform_weights_on_duplicates_equal_plain_tls() {
        let data = toy();
        let t = 3;
        let mut atoms = Vec::new();
        for i in 0..data.len() {
            for _ in 0..=t {
                atoms.push(data.w()[(i, 0)]);
            }
        }
        let pm = PseudoMeasure::from_parts(
            t,
            1,
            atoms,
            vec![1.0 / (t + 1) as f64; data.len() * (t + 1)],
            data.y().iter().copied().collect(),
        );
        for intercept in [false, true] {
            let a = weighted_tls_solve(&pm, intercept).unwrap();
            let b = tls_solve(data.w(), data.y(), intercept).unwrap();
            for (u, v) in a.theta.iter().zip(&b.theta) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_tls_matches_two_parameter_grid() {
        let data = validate_dataset(&[vec![0.0, 0.3], vec![1.0, 0.8], vec![2.0, 2.4]]).unwrap();
        let dp = DpConfig {
            c: 1.0,
            truncation: 2,
            iterations: 1,
            seed: 17,
        };
        let pm = sample_pseudo_measure(&data, &ErrorPrior::gaussian(0.5), &dp, 0);
        let sol = weighted_tls_solve(&pm, true).unwrap();
        let f = |a: f64, b: f64| weighted_tls_objective(&[a, b], &pm, true);
        // coarse pass then a fine pass around the coarse minimizer
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for k in 0..=400 {
                let (a, b) = (-5.0 + 0.025 * i as f64, -5.0 + 0.025 * k as f64);
                let v = f(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (_, a0, b0) = best;
        for i in 0..=1000 {
            for k in 0..=1000 {
                let (a, b) = (a0 - 0.05 + 1e-4 * i as f64, b0 - 0.05 + 1e-4 * k as f64);
                let v = f(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert!((sol.theta[0] - best.1).abs() < 1e-3, "{:?} vs {:?}", sol.theta, best);
        assert!((sol.theta[1] - best.2).abs() < 1e-3, "{:?} vs {:?}", sol.theta, best);
    }

    #[test]
    fn atom_permutation_invariance() {
        let data = toy();
        let dp = DpConfig {
            c: 2.0,
            truncation: 4,
            iterations: 1,
            seed: 23,
        };
        let pm = sample_pseudo_measure(&data, &ErrorPrior::student_t(3.0, 0.5), &dp, 0);
        let k = pm.atoms_per_obs();
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for i in 0..pm.n() {
            // reverse the prior atoms of every observation
            for t in (0..k - 1).rev() {
                atoms.extend_from_slice(pm.atom(i, t));
                weights.push(pm.weight(i, t));
            }
            atoms.extend_from_slice(pm.atom(i, k - 1));
            weights.push(pm.weight(i, k - 1));
        }
        let permuted = PseudoMeasure::from_parts(pm.truncation(), 1, atoms, weights, pm.y().to_vec());
        let a = weighted_tls_solve(&pm, true).unwrap();
        let b = weighted_tls_solve(&permuted, true).unwrap();
        for (u, v) in a.theta.iter().zip(&b.theta) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn common_row_scale_leaves_theta_unchanged() {
        let data = toy();
        let dp = DpConfig {
            c: 1.0,
            truncation: 3,
            iterations: 1,
            seed: 29,
        };
        let pm = sample_pseudo_measure(&data, &ErrorPrior::gaussian(0.4), &dp, 0);
        let atoms: Vec<f64> = pm.atoms().flat_map(|(x, _, _)| x.to_vec()).collect();
        let scaled: Vec<f64> = pm.atoms().map(|(_, _, xi)| xi * 37.0).collect();
        let rescaled = PseudoMeasure::from_parts(pm.truncation(), 1, atoms, scaled, pm.y().to_vec());
        let a = weighted_tls_solve(&pm, false).unwrap();
        let b = weighted_tls_solve(&rescaled, false).unwrap();
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-12);
    }

    #[test]
    fn nll_equivalence() {
        let x = col(&[1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let nu = DMatrix::zeros(3, 1);
        let (tls, nll) = tls_nll_equivalence_check(&[1.0], &nu, &x, &y);
        assert_eq!(tls, 0.0);
        assert!((nll - 3.0 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(12, 1, |_, _| rng.gen_range(-2.0..2.0));
        let y = DVector::from_fn(12, |_, _| rng.gen_range(-2.0..2.0));
        let nu = DMatrix::from_fn(12, 1, |_, _| rng.gen_range(-0.5..0.5));
        let (tls, nll) = tls_nll_equivalence_check(&[0.7], &nu, &x, &y);
        let c = 12.0 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll - c - 0.5 * tls).abs() < 1e-10);

        // doubling every residual quadruples both quadratic parts
        let (tls2, nll2) = tls_nll_equivalence_check(&[0.7], &(nu.clone() * 2.0), &(x.clone() * 2.0), &(y.clone() * 2.0));
        assert!((tls2 - 4.0 * tls).abs() < 1e-9);
        assert!(((nll2 - c) - 4.0 * (nll - c)).abs() < 1e-9);
    }
}

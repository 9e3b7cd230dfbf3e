//! Posterior bootstrap drivers, baseline dispatch, and posterior summaries.
//!
//! Every bootstrap iteration `j` draws its pseudo-measure and any
//! iteration-level randomness from substreams keyed by `(seed, j, ·)`, so a
//! run gives identical draws for any number of workers.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{default_bounds, naive_fit, simex, SimexConfig};
use crate::data::ObservedDataset;
use crate::dp::sample_pseudo_measure;
use crate::error::{Error, Result};
use crate::mmd::{flatten, subsample_atoms, MmdObjective, DEFAULT_ATOM_CAP};
use crate::models::{MeanFunction, RegressionModel};
use crate::optimize::{minimize_from_starts, random_restart_init, OptimizerConfig};
use crate::rng::derive_substream;
use crate::stats::{mean, quantile_sorted, std_dev};
use crate::tls::{tls_solve, weighted_tls_solve};
use crate::types::{DpConfig, ErrorPrior, KernelConfig, Method, PosteriorSamples, RowFailure, RunManifest};

/// Share of failed iterations above which a run is rejected.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

/// Iterations per warm-start block of the MMD driver; the first iteration
/// of each block starts from random restarts.
pub const WARM_START_BLOCK: usize = 10;

#[derive(Debug, Clone)]
pub struct FitRequest {
    pub data: ObservedDataset,
    pub model: RegressionModel,
    pub method: Method,
    pub prior: ErrorPrior,
    pub dp: DpConfig,
    pub kernel: KernelConfig,
    pub optimizer: OptimizerConfig,
    pub atom_cap: usize,
    /// Start iteration `j` from iteration `j - 1` within a block.
    pub warm_start: bool,
    pub simex: Option<SimexConfig>,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl FitRequest {
    pub fn new(data: ObservedDataset, model: RegressionModel, method: Method) -> Self {
        Self {
            data,
            model,
            method,
            prior: ErrorPrior::gaussian(1.0),
            dp: DpConfig {
                c: 1.0,
                truncation: 100,
                iterations: 500,
                seed: 0,
            },
            kernel: KernelConfig { l_x: 1.0, l_y: 1.0 },
            optimizer: OptimizerConfig::default(),
            atom_cap: DEFAULT_ATOM_CAP,
            warm_start: true,
            simex: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.data.dim() != self.model.input_dim() {
            return Err(Error::config(
                "/model",
                format!(
                    "model {} expects {} covariate column(s), data has {}",
                    self.model.name(),
                    self.model.input_dim(),
                    self.data.dim()
                ),
            ));
        }
        let robust = matches!(self.method, Method::RobustTls | Method::RobustMmd);
        if robust {
            self.prior.validate(self.data.dim())?;
            self.dp.validate()?;
        }
        if self.method == Method::RobustMmd {
            self.kernel.validate()?;
            self.optimizer.validate()?;
            if self.atom_cap < 2 {
                return Err(Error::config("/atom_cap", "must be >= 2"));
            }
        }
        if matches!(self.method, Method::RobustTls | Method::TlsPlain)
            && !matches!(self.model.mean, MeanFunction::Linear { .. })
        {
            return Err(unsupported(self));
        }
        if self.model.learn_sigma && self.method != Method::RobustMmd {
            return Err(Error::config("/model/learn_sigma", "only the robust_mmd method learns sigma_eps"));
        }
        if self.method == Method::Simex {
            match &self.simex {
                Some(sc) => sc.validate()?,
                None => return Err(Error::config("/simex", "required for method simex")),
            }
        }
        Ok(())
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.model.n_params()).map(|k| format!("theta_{k}")).collect();
        if self.model.learn_sigma {
            names.push("log_sigma_eps".into());
        }
        names
    }

    pub fn manifest(&self) -> RunManifest {
        let robust = matches!(self.method, Method::RobustTls | Method::RobustMmd);
        RunManifest {
            method: self.method,
            model: self.model.name().into(),
            seed: self.dp.seed,
            n: self.data.len(),
            parameter_names: self.parameter_names(),
            dp: robust.then_some(self.dp),
            prior: robust.then(|| self.prior.clone()),
            kernel: (self.method == Method::RobustMmd).then_some(self.kernel),
        }
    }
}

fn unsupported(req: &FitRequest) -> Error {
    Error::Unsupported {
        method: req.method.name().into(),
        model: req.model.name().into(),
    }
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("/workers", e.to_string()))?;
    Ok(pool.install(f))
}

/// Collects per-iteration outcomes in index order and applies the failure
/// threshold.
fn assemble(req: &FitRequest, outcomes: Vec<Result<Vec<f64>>>) -> Result<PosteriorSamples> {
    let total = outcomes.len();
    let p = req.model.n_optimized();
    let mut rows = Vec::with_capacity(total * p);
    let mut failures = Vec::new();
    for (j, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(theta) => rows.extend(theta),
            Err(e) => failures.push(RowFailure {
                iteration: j,
                reason: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_SHARE * total as f64 || failures.len() == total {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    let good = total - failures.len();
    Ok(PosteriorSamples {
        theta: DMatrix::from_row_slice(good, p, &rows),
        manifest: req.manifest(),
        failures,
    })
}

/// Robust posterior bootstrap with the weighted TLS loss (linear models).
pub fn posterior_bootstrap_tls(req: &FitRequest) -> Result<PosteriorSamples> {
    let intercept = match req.model.mean {
        MeanFunction::Linear { intercept, .. } => intercept,
        _ => return Err(unsupported(req)),
    };
    let b = req.dp.iterations;
    let outcomes = in_pool(req.workers, || {
        (0..b)
            .into_par_iter()
            .map(|j| {
                let pm = sample_pseudo_measure(&req.data, &req.prior, &req.dp, j);
                weighted_tls_solve(&pm, intercept).map(|s| s.theta)
            })
            .collect::<Vec<_>>()
    })?;
    assemble(req, outcomes)
}

fn mmd_iteration(req: &FitRequest, bounds: &[(f64, f64)], j: usize, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let pm = sample_pseudo_measure(&req.data, &req.prior, &req.dp, j);
    let mut atoms = flatten(&pm);
    if let MeanFunction::BSpline(spec) = &req.model.mean {
        atoms = atoms.retain(|x| x[0] >= spec.lo() && x[0] <= spec.hi())?;
    }
    let mut rng = derive_substream(req.dp.seed, j as u64, req.data.len() as u64);
    let atoms = subsample_atoms(&atoms, req.atom_cap, &mut rng);
    let objective = MmdObjective::new(&req.model, &atoms, &req.kernel)?;
    let starts = match warm {
        Some(theta) => vec![theta.to_vec()],
        None => random_restart_init(|t| objective.value(t), bounds, &req.optimizer, &mut rng),
    };
    Ok(minimize_from_starts(|t| objective.value_and_grad(t), &starts, &req.optimizer)?.theta)
}

/// Robust posterior bootstrap with the MMD loss.
///
/// Iterations run in blocks of [`WARM_START_BLOCK`]; inside a block each
/// iteration starts from the previous one's optimum when warm starts are
/// on, and from random restarts otherwise. Blocks are independent, which
/// keeps the draws identical for every worker count.
pub fn posterior_bootstrap_mmd(req: &FitRequest) -> Result<PosteriorSamples> {
    let bounds = default_bounds(&req.model, &req.data)?;
    let b = req.dp.iterations;
    let blocks = b.div_ceil(WARM_START_BLOCK);
    let per_block = in_pool(req.workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|blk| {
                let mut out = Vec::with_capacity(WARM_START_BLOCK);
                let mut previous: Option<Vec<f64>> = None;
                for j in blk * WARM_START_BLOCK..((blk + 1) * WARM_START_BLOCK).min(b) {
                    let warm = if req.warm_start { previous.as_deref() } else { None };
                    let outcome = mmd_iteration(req, &bounds, j, warm);
                    previous = outcome.as_ref().ok().cloned();
                    out.push(outcome);
                }
                out
            })
            .collect::<Vec<_>>()
    })?;
    assemble(req, per_block.into_iter().flatten().collect())
}

/// Runs the requested method. Point-estimate methods return a single row.
pub fn fit(req: &FitRequest) -> Result<PosteriorSamples> {
    req.validate()?;
    let point = |theta: Vec<f64>| assemble(req, vec![Ok(theta)]);
    match req.method {
        Method::RobustTls => posterior_bootstrap_tls(req),
        Method::RobustMmd => posterior_bootstrap_mmd(req),
        Method::Ols => point(naive_fit(&req.data, &req.model, &req.optimizer, req.dp.seed)?),
        Method::TlsPlain => {
            let intercept = matches!(req.model.mean, MeanFunction::Linear { intercept: true, .. });
            point(tls_solve(req.data.w(), req.data.y(), intercept)?.theta)
        }
        Method::Simex => {
            let sc = req.simex.as_ref().expect("validated");
            let fitter = |d: &ObservedDataset| naive_fit(d, &req.model, &req.optimizer, req.dp.seed);
            let res = in_pool(req.workers, || simex(&req.data, sc, fitter))??;
            point(res.theta)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Per-parameter mean, standard deviation, and type-7 quantiles.
pub fn summarize(ps: &PosteriorSamples) -> Result<Vec<ParamSummary>> {
    summarize_columns(&ps.theta, &ps.manifest.parameter_names)
}

/// [`summarize`] for a bare draws matrix with one named column per parameter.
pub fn summarize_columns(theta: &DMatrix<f64>, names: &[String]) -> Result<Vec<ParamSummary>> {
    if theta.nrows() == 0 {
        return Err(Error::Shape("no posterior rows to summarize".into()));
    }
    Ok((0..theta.ncols())
        .map(|k| {
            let mut col: Vec<f64> = theta.column(k).iter().copied().collect();
            let (m, sd) = (mean(&col), std_dev(&col));
            col.sort_by(f64::total_cmp);
            let q = |p: f64| quantile_sorted(&col, p);
            ParamSummary {
                name: names.get(k).cloned().unwrap_or_else(|| format!("theta_{}", k + 1)),
                mean: m,
                sd,
                q05: q(0.05),
                q25: q(0.25),
                q50: q(0.5),
                q75: q(0.75),
                q95: q(0.95),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
}

/// Pointwise credible band of the regression curve: `lo`/`hi` are the
/// `(1 ∓ level)/2` quantiles of `g(θ, x)` over the rows and `mid` its mean.
/// For the two-group model the curve is the treatment effect at `x`.
pub fn credible_band(ps: &PosteriorSamples, model: &RegressionModel, grid: &[f64], level: f64) -> Result<Vec<BandPoint>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config("/band/level", "must lie in (0, 1)"));
    }
    if ps.is_empty() {
        return Err(Error::Shape("no posterior rows for a band".into()));
    }
    let curve = |theta: &[f64], x: f64| -> Result<f64> {
        match &model.mean {
            MeanFunction::Ate(spec) => Ok(spec.ate_eval(theta, x)),
            _ if model.input_dim() == 1 => model.eval(theta, &[x]),
            _ => Err(Error::Unsupported {
                method: "credible_band".into(),
                model: format!("{} with {} covariates", model.name(), model.input_dim()),
            }),
        }
    };
    let rows: Vec<Vec<f64>> = (0..ps.len()).map(|j| ps.row(j)).collect();
    grid.iter()
        .map(|&x| {
            let mut vals = rows.iter().map(|t| curve(t, x)).collect::<Result<Vec<f64>>>()?;
            let mid = mean(&vals);
            vals.sort_by(f64::total_cmp);
            Ok(BandPoint {
                x,
                lo: quantile_sorted(&vals, (1.0 - level) / 2.0),
                mid,
                hi: quantile_sorted(&vals, (1.0 + level) / 2.0),
            })
        })
        .collect()
}

//! JSON run configuration: strict parsing, defaults, and translation into a
//! [`FitRequest`].

use std::path::Path;

use robust_mem::baselines::SimexConfig;
use robust_mem::models::{ate_model, bspline_model, linear_model, sigmoid_model, AteSpec, SplineBasisSpec, DEFAULT_ATE_KNOTS};
use robust_mem::optimize::OptimizerConfig;
use robust_mem::types::{DpConfig, ErrorPrior, KernelConfig, Method};
use robust_mem::{FitRequest, ObservedDataset, RegressionModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub dp: DpSection,
    #[serde(default)]
    pub kernel: Option<KernelSection>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub simex: Option<SimexSection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub atom_cap: Option<usize>,
    #[serde(default = "yes")]
    pub warm_start: bool,
    #[serde(default)]
    pub band: Option<BandConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    /// Linear model: include an intercept (default true).
    #[serde(default)]
    pub intercept: Option<bool>,
    #[serde(default)]
    pub sigma_eps: Option<f64>,
    #[serde(default)]
    pub learn_sigma: bool,
    #[serde(default)]
    pub theta_bounds: Option<Vec<[f64; 2]>>,
    /// Spline models: number of knots.
    #[serde(default)]
    pub knots: Option<usize>,
    /// B-spline model: basis range, default the observed covariate range.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Gaussian,
    StudentT,
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    #[serde(default)]
    pub scale: Option<ScaleSpec>,
    #[serde(default)]
    pub df: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t: usize,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
}

fn default_c() -> f64 {
    1.0
}
fn default_t() -> usize {
    100
}
fn default_b() -> usize {
    500
}

impl Default for DpSection {
    fn default() -> Self {
        Self {
            c: default_c(),
            t: default_t(),
            b: default_b(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub l_x: f64,
    pub l_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimexSection {
    pub sigma_nu2: f64,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub b_sim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub points: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    0.9
}

impl BandConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.grid_lo];
        }
        let step = (self.grid_hi - self.grid_lo) / (self.points - 1) as f64;
        let mut grid: Vec<f64> = (0..self.points).map(|k| self.grid_lo + step * k as f64).collect();
        grid[self.points - 1] = self.grid_hi;
        grid
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.grid_lo.is_finite() && self.grid_hi.is_finite() && self.grid_lo <= self.grid_hi) {
            return Err(CliError::config("/band/grid_lo", "need finite grid_lo <= grid_hi"));
        }
        if self.points == 0 {
            return Err(CliError::config("/band/points", "must be >= 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::config("/band/level", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

/// Parses JSON text into `T`, reporting failures with a JSON pointer.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut pointer = pointer_of(err.path());
        let inner = err.into_inner();
        let message = inner.to_string();
        // unknown keys are reported against the parent object; point at the key
        if let Some(rest) = message.strip_prefix("unknown field `") {
            if let Some(key) = rest.split('`').next() {
                if !pointer.ends_with(&format!("/{key}")) {
                    if pointer == "/" {
                        pointer.clear();
                    }
                    pointer = format!("{pointer}/{key}");
                }
            }
        }
        CliError::config(pointer, message)
    })
}

pub fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("/", format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text)
}

impl RunConfig {
    fn prior(&self, dim: usize) -> CliResult<ErrorPrior> {
        let Some(p) = &self.prior else {
            return Err(CliError::config("/prior", format!("required for method {}", self.method.name())));
        };
        let scale = match &p.scale {
            None => vec![1.0],
            Some(ScaleSpec::One(s)) => vec![*s],
            Some(ScaleSpec::Many(v)) => v.clone(),
        };
        let prior = match p.kind {
            PriorKind::Gaussian => {
                if p.df.is_some() {
                    return Err(CliError::config("/prior/df", "only used by student_t"));
                }
                ErrorPrior::Gaussian { scale }
            }
            PriorKind::StudentT => {
                let df = p.df.ok_or_else(|| CliError::config("/prior/df", "required for student_t"))?;
                ErrorPrior::StudentT { scale, df }
            }
            PriorKind::PointMass => ErrorPrior::PointMass,
        };
        prior.validate(dim)?;
        Ok(prior)
    }

    fn model(&self, data: &ObservedDataset) -> CliResult<RegressionModel> {
        let m = &self.model;
        let reject = |key: &str, used: bool| -> CliResult<()> {
            if used {
                Err(CliError::config(format!("/model/{key}"), format!("not used by model {}", m.name)))
            } else {
                Ok(())
            }
        };
        let column = |k: usize| -> Vec<f64> { data.w().column(k).iter().copied().collect() };
        let mut model = match m.name.as_str() {
            "linear" => {
                reject("knots", m.knots.is_some())?;
                reject("range", m.range.is_some())?;
                linear_model(data.dim(), m.intercept.unwrap_or(true))
            }
            "sigmoid" => {
                reject("intercept", m.intercept.is_some())?;
                reject("knots", m.knots.is_some())?;
                reject("range", m.range.is_some())?;
                sigmoid_model()
            }
            "bspline" => {
                reject("intercept", m.intercept.is_some())?;
                let x = column(0);
                let [lo, hi] = m.range.unwrap_or_else(|| {
                    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    [lo, hi]
                });
                let spec = SplineBasisSpec::equidistant(m.knots.unwrap_or(10), lo, hi)
                    .map_err(|e| CliError::config("/model/knots", e.to_string()))?;
                bspline_model(spec)
            }
            "ate" => {
                reject("intercept", m.intercept.is_some())?;
                reject("range", m.range.is_some())?;
                let spec = AteSpec::from_quantiles(&column(0), m.knots.unwrap_or(DEFAULT_ATE_KNOTS))
                    .map_err(|e| CliError::config("/model/knots", e.to_string()))?;
                ate_model(spec)
            }
            other => {
                return Err(CliError::config(
                    "/model/name",
                    format!("unknown model {other:?} (expected linear, sigmoid, bspline, or ate)"),
                ))
            }
        };
        if let Some(s) = m.sigma_eps {
            model = model.with_sigma(s);
        }
        model = model.with_learned_sigma(m.learn_sigma);
        if let Some(b) = &m.theta_bounds {
            model = model.with_bounds(b.iter().map(|[lo, hi]| (*lo, *hi)).collect());
        }
        model.validate()?;
        Ok(model)
    }

    /// Builds a validated request for `data`.
    pub fn to_request(&self, data: ObservedDataset) -> CliResult<FitRequest> {
        if let Some(want) = self.model_input_dim() {
            if data.dim() != want {
                return Err(CliError::config(
                    "/model/name",
                    format!("model {} expects {want} covariate column(s), data has {}", self.model.name, data.dim()),
                ));
            }
        }
        let model = self.model(&data)?;
        let robust = matches!(self.method, Method::RobustTls | Method::RobustMmd);
        let mut req = FitRequest::new(data, model, self.method);
        req.dp = DpConfig {
            c: self.dp.c,
            truncation: self.dp.t,
            iterations: self.dp.b,
            seed: self.seed,
        };
        if robust {
            req.prior = self.prior(req.data.dim())?;
        }
        if self.method == Method::RobustMmd {
            let k = self
                .kernel
                .ok_or_else(|| CliError::config("/kernel", "required for method robust_mmd"))?;
            req.kernel = KernelConfig { l_x: k.l_x, l_y: k.l_y };
        } else if self.kernel.is_some() {
            return Err(CliError::config("/kernel", "only used by robust_mmd"));
        }
        req.optimizer = self.optimizer.clone();
        if let Some(cap) = self.atom_cap {
            req.atom_cap = cap;
        }
        req.warm_start = self.warm_start;
        if let Some(s) = &self.simex {
            let defaults = SimexConfig::default();
            req.simex = Some(SimexConfig {
                sigma_nu2: s.sigma_nu2,
                lambda_grid: s.lambda_grid.clone().unwrap_or(defaults.lambda_grid),
                b_sim: s.b_sim.unwrap_or(defaults.b_sim),
                seed: self.seed,
            });
        }
        if let Some(b) = &self.band {
            b.validate()?;
        }
        req.validate()?;
        Ok(req)
    }

    /// Covariate count required by the named model; the linear model takes any.
    fn model_input_dim(&self) -> Option<usize> {
        match self.model.name.as_str() {
            "sigmoid" | "bspline" => Some(1),
            "ate" => Some(2),
            _ => None,
        }
    }
}

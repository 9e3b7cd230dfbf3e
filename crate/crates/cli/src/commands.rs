//! Subcommand implementations.

use std::path::{Path, PathBuf};

use robust_mem::bootstrap::{credible_band, summarize, summarize_columns, ParamSummary};
use robust_mem::mmd::{bound_breakdown, BoundBreakdown, BoundInputs};
use robust_mem::synthetic::{simulate, Generator, SimulationConfig};
use robust_mem::types::{PosteriorSamples, RowFailure, RunManifest};
use serde::{Deserialize, Serialize};

use crate::config::{parse_json, read_config, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;

/// Simulation settings as written in a config file; omitted fields take the
/// generator's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub generator: Option<Generator>,
    pub n: Option<usize>,
    pub theta0: Option<Vec<f64>>,
    pub sigma_eps2: Option<f64>,
    pub sigma_nu2: Option<f64>,
}

impl SimulationFile {
    pub fn resolve(self, fallback: Generator) -> SimulationConfig {
        let generator = self.generator.unwrap_or(fallback);
        let base = match generator {
            Generator::Linear => SimulationConfig::linear_default(),
            Generator::Sigmoid => SimulationConfig::sigmoid_default(),
        };
        SimulationConfig {
            generator,
            n: self.n.unwrap_or(base.n),
            theta0: self.theta0.unwrap_or(base.theta0),
            sigma_eps2: self.sigma_eps2.unwrap_or(base.sigma_eps2),
            sigma_nu2: self.sigma_nu2.unwrap_or(base.sigma_nu2),
        }
    }
}

pub fn run_simulate(cfg: &SimulationConfig, seed: u64, out: &Path) -> CliResult<()> {
    let (data, truth) = simulate(cfg, seed)?;
    io::ensure_dir(out)?;
    io::write_dataset(&out.join("data.csv"), &data)?;
    io::write_json(&out.join("truth.json"), &truth)
}

pub fn read_simulation_file(path: &Path) -> CliResult<SimulationFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("/", format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text)
}

#[derive(Debug, Serialize)]
pub struct DataRecord {
    pub path: PathBuf,
    pub rows: usize,
    pub columns: usize,
    pub content_hash: String,
}

#[derive(Debug, Serialize)]
pub struct FullManifest {
    pub run: RunManifest,
    pub config: RunConfig,
    pub data: DataRecord,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub manifest: FullManifest,
    pub rows: usize,
    pub parameters: Vec<ParamSummary>,
    pub failures: Vec<RowFailure>,
}

#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Fits the configured method and writes `samples.csv`, `summary.json`,
/// and `band.csv` when a band is configured.
pub fn run_fit(config_path: &Path, data_path: &Path, out: &Path, overrides: &FitOverrides) -> CliResult<PosteriorSamples> {
    let mut config = read_config(config_path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    let (data, bytes) = io::read_dataset(data_path)?;
    let (rows, columns) = (data.len(), data.dim() + 1);
    let mut req = config.to_request(data)?;
    if let Some(w) = overrides.workers {
        req.workers = w;
    }
    let ps = robust_mem::fit(&req)?;

    io::ensure_dir(out)?;
    io::write_matrix(&out.join("samples.csv"), &ps.manifest.parameter_names, &ps.theta)?;
    if let Some(band) = &config.band {
        let points = credible_band(&ps, &req.model, &band.grid(), band.level)?;
        io::write_band(&out.join("band.csv"), &points)?;
    }
    let summary = FitSummary {
        manifest: FullManifest {
            run: ps.manifest.clone(),
            config,
            data: DataRecord {
                path: data_path.to_path_buf(),
                rows,
                columns,
                content_hash: io::content_hash(&bytes),
            },
        },
        rows: ps.len(),
        parameters: summarize(&ps)?,
        failures: ps.failures.clone(),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(ps)
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundInputs,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub bound: f64,
    pub components: BoundBreakdown,
    /// The same bound over a list of concentrations.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub c_sweep: Vec<SweepPoint>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub c: f64,
    pub bound: f64,
    pub sampling: f64,
    pub prior_specification: f64,
    pub me_deviation: f64,
}

pub fn run_bounds(inputs: BoundInputs, sweep: &[f64]) -> CliResult<BoundsReport> {
    inputs.validate()?;
    let b = bound_breakdown(&inputs);
    let c_sweep = sweep
        .iter()
        .map(|&c| {
            let bi = BoundInputs { c, ..inputs };
            bi.validate().map_err(|_| CliError::config("/c_sweep", format!("invalid concentration {c}")))?;
            let p = bound_breakdown(&bi);
            Ok(SweepPoint {
                c,
                bound: p.total,
                sampling: p.sampling,
                prior_specification: p.prior_specification,
                me_deviation: p.me_deviation,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(BoundsReport {
        inputs,
        c1: b.c1,
        c2: b.c2,
        bound: b.total,
        components: b,
        c_sweep,
    })
}

/// Per-column summary of a samples CSV.
pub fn run_summarize(samples: &Path) -> CliResult<Vec<ParamSummary>> {
    let (names, theta) = io::read_samples(samples)?;
    Ok(summarize_columns(&theta, &names)?)
}

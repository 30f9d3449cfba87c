//! Run configuration: a single JSON document, validated before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use entropic_core::verify::{default_slack, CHECK_NAMES, EPSILON_LIMIT, EVI_W2};
use entropic_core::{
    build_grid, gaussian_density, mixture_density, Density, GaussianSpec, Grid, MixtureSpec, ScalarField, SolverOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub marginals: MarginalsConfig,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub interpolation: InterpolationConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_eps() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsConfig {
    pub mu0: MarginalSource,
    pub mu1: MarginalSource,
}

/// Where a marginal comes from. `file` holds whitespace-separated node values in
/// row-major order (axis 0 fastest); `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MarginalSource {
    Gaussian(GaussianSpec),
    Mixture(MixtureSpec),
    File(FileSource),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    entropic_core::schrodinger::DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    entropic_core::schrodinger::DEFAULT_TOL
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationConfig {
    #[serde(default = "default_s_count")]
    pub s_count: usize,
    #[serde(default = "default_ds")]
    pub ds: f64,
}

fn default_s_count() -> usize {
    entropic_core::interpolation::DEFAULT_S_COUNT
}

fn default_ds() -> f64 {
    entropic_core::interpolation::DEFAULT_DS
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        Self {
            s_count: default_s_count(),
            ds: default_ds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub slacks: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: VerifyParams,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Sampling parameters of the individual checks.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub costa_times: Vec<f64>,
    pub regularity_dt: Vec<f64>,
    pub evi_times: Vec<f64>,
    pub integral_evi_times: Vec<f64>,
    pub contraction_tau: f64,
    pub contraction_points: usize,
    pub eps_list: Vec<f64>,
    pub evi_w2_times: Vec<f64>,
    pub evi_w2_eps_small: Option<f64>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            costa_times: linspace(0.0, 2.0, 41),
            regularity_dt: vec![1e-2, 5e-3, 2.5e-3],
            evi_times: linspace(0.0, 0.5, 11),
            integral_evi_times: vec![0.1, 0.25, 0.5],
            contraction_tau: 0.3,
            contraction_points: 31,
            eps_list: vec![1.0, 0.5, 0.25, 0.1, 0.05],
            evi_w2_times: vec![0.0, 0.1, 0.2],
            evi_w2_eps_small: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
}

/// The validated sweep variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Eps(Vec<f64>),
    Time(Vec<f64>),
}

/// A parsed configuration together with the raw bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub raw: Vec<u8>,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = parse(&raw)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, raw, base_dir })
    }
}

pub fn parse(raw: &[u8]) -> Result<RunConfig, CliError> {
    let config: RunConfig = serde_json::from_slice(raw).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(bad(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.solver.tol > 0.0) {
            return Err(bad(format!("solver.tol must be positive, got {}", self.solver.tol)));
        }
        let s_count = self.interpolation.s_count;
        if s_count < 9 || s_count.is_multiple_of(2) {
            return Err(bad(format!("interpolation.s_count must be odd and at least 9, got {s_count}")));
        }
        if !(self.interpolation.ds > 0.0 && self.interpolation.ds < 0.25) {
            return Err(bad("interpolation.ds must lie in (0, 0.25)"));
        }
        for (name, value) in &self.verify.slacks {
            if default_slack(name).is_none() {
                return Err(bad(format!("unknown check in verify.slacks: {name}")));
            }
            if !value.is_finite() {
                return Err(bad(format!("slack for {name} must be finite")));
            }
        }
        if let Some(checks) = &self.verify.checks {
            self.check_names(checks)?;
        }
        let p = &self.verify.params;
        let times_ok = |v: &[f64]| v.iter().all(|t| t.is_finite() && *t >= 0.0);
        if p.costa_times.len() < 3 || !times_ok(&p.costa_times) {
            return Err(bad("verify.params.costa_times needs at least 3 nonnegative times"));
        }
        if p.regularity_dt.is_empty() || p.regularity_dt.iter().any(|d| !(*d > 0.0)) {
            return Err(bad("verify.params.regularity_dt needs positive steps"));
        }
        if !times_ok(&p.evi_times) || !times_ok(&p.integral_evi_times) || !times_ok(&p.evi_w2_times) {
            return Err(bad("verify.params times must be nonnegative"));
        }
        if !(p.contraction_tau > 0.0) || p.contraction_points < 2 {
            return Err(bad("verify.params.contraction_tau must be positive with at least 2 points"));
        }
        if p.eps_list.is_empty() || p.eps_list.windows(2).any(|w| w[1] >= w[0]) || p.eps_list.iter().any(|e| !(*e > 0.0))
        {
            return Err(bad("verify.params.eps_list must be positive and strictly decreasing"));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    /// Validates check names against the grid dimension.
    pub fn check_names(&self, names: &[String]) -> Result<(), CliError> {
        if names.is_empty() {
            return Err(bad("no checks requested"));
        }
        for name in names {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown check '{name}' (expected one of {})",
                    CHECK_NAMES.join(", ")
                )));
            }
            if self.grid.dim != 1 && (name == EPSILON_LIMIT || name == EVI_W2) {
                return Err(CliError::Usage(format!("check '{name}' requires a 1-dimensional grid")));
            }
        }
        Ok(())
    }

    /// Checks to run: explicit list, else the config list, else every check valid for the grid.
    pub fn selected_checks(&self, cli: Option<&[String]>) -> Result<Vec<String>, CliError> {
        let names: Vec<String> = match (cli, &self.verify.checks) {
            (Some(list), _) => list.to_vec(),
            (None, Some(list)) => list.clone(),
            (None, None) => CHECK_NAMES
                .iter()
                .filter(|n| self.grid.dim == 1 || (**n != EPSILON_LIMIT && **n != EVI_W2))
                .map(|n| n.to_string())
                .collect(),
        };
        self.check_names(&names)?;
        Ok(names)
    }

    pub fn slack(&self, name: &str) -> f64 {
        self.verify
            .slacks
            .get(name)
            .copied()
            .or_else(|| default_slack(name))
            .unwrap_or(0.0)
    }

    pub fn sweep(&self) -> Result<Sweep, CliError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| bad("sweep section is missing"))?
            .resolve()
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, CliError> {
        Ok(build_grid(self.grid.dim, self.grid.lo, self.grid.hi, self.grid.points)?)
    }

    pub fn marginals(&self, grid: &Arc<Grid>, base_dir: &Path) -> Result<(Density, Density), CliError> {
        Ok((
            load_marginal(&self.marginals.mu0, grid, base_dir)?,
            load_marginal(&self.marginals.mu1, grid, base_dir)?,
        ))
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.resolve().map(|_| ())
    }

    fn resolve(&self) -> Result<Sweep, CliError> {
        match (&self.eps_list, &self.t_grid) {
            (Some(list), None) => {
                if list.is_empty() {
                    return Err(bad("sweep.eps_list is empty"));
                }
                if list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    return Err(bad("sweep.eps_list values must be positive"));
                }
                Ok(Sweep::Eps(list.clone()))
            }
            (None, Some(list)) => {
                if list.is_empty() {
                    return Err(bad("sweep.t_grid is empty"));
                }
                if list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    return Err(bad("sweep.t_grid values must be nonnegative"));
                }
                Ok(Sweep::Time(list.clone()))
            }
            _ => Err(bad("sweep needs exactly one of eps_list or t_grid")),
        }
    }
}

fn load_marginal(source: &MarginalSource, grid: &Arc<Grid>, base_dir: &Path) -> Result<Density, CliError> {
    match source {
        MarginalSource::Gaussian(spec) => Ok(gaussian_density(grid, spec)?),
        MarginalSource::Mixture(spec) => Ok(mixture_density(grid, spec)?),
        MarginalSource::File(file) => {
            let path = if file.path.is_absolute() {
                file.path.clone()
            } else {
                base_dir.join(&file.path)
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| bad(format!("cannot read marginal file {}: {e}", path.display())))?;
            let values = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(str::split_whitespace)
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| bad(format!("bad number '{tok}' in {}", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let density = Density::normalize(ScalarField::new(grid.clone(), values)?)?;
            density.check_support_margin(
                entropic_core::reference::REFERENCE_EPS_TMAX,
                entropic_core::grid::MASS_DEFECT_TOL,
            )?;
            Ok(density)
        }
    }
}

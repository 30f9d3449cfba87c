use std::path::{Path, PathBuf};
use std::sync::Arc;

use entropic_core::verify::{
    check_concavity, check_contraction, check_costa_heat_flow, check_epsilon_limit, check_evi, check_evi_w2,
    check_integral_evi, check_regularity_identity, CONCAVITY, CONTRACTION, COSTA, EPSILON_LIMIT, EVI, EVI_W2,
    INTEGRAL_EVI, REGULARITY,
};
use entropic_core::{
    entropic_cost_primal, heat_flow, hjb_residuals, relative_entropy, sample_path, solve_with, transport_residual,
    wasserstein2_squared_1d, BridgeSolution, CheckResult, CostModel, Density, Grid,
};

use crate::config::{LoadedConfig, RunConfig, Sweep};
use crate::error::CliError;
use crate::output::{
    csv_table, diagnostics_csv, report_json, solution_json, OutputDir, DIAGNOSTICS_FILE, INTERP_FILE, REPORT_FILE,
    SOLUTION_FILE, SWEEP_FILE,
};

pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub quiet: bool,
    pub checks: Option<Vec<String>>,
}

impl RunArgs {
    pub fn new(config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            out: Some(out.into()),
            quiet: true,
            checks: None,
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Everything a command needs, loaded and validated before any file is written.
struct Prepared {
    loaded: LoadedConfig,
    grid: Arc<Grid>,
    mu0: Density,
    mu1: Density,
    out_dir: PathBuf,
}

impl Prepared {
    fn load(args: &RunArgs) -> Result<Self, CliError> {
        let loaded = LoadedConfig::load(&args.config)?;
        let grid = loaded.config.build_grid()?;
        let (mu0, mu1) = loaded.config.marginals(&grid, &loaded.base_dir)?;
        let out_dir = resolve_out_dir(args, &loaded.config);
        Ok(Self {
            loaded,
            grid,
            mu0,
            mu1,
            out_dir,
        })
    }

    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn output(&self) -> Result<OutputDir, CliError> {
        OutputDir::create(&self.out_dir, &self.loaded.raw)
    }

    /// Solves the bridge system and records the iteration history; unconverged runs
    /// still leave `diagnostics.csv` behind.
    fn solve(&self, out: &OutputDir, args: &RunArgs) -> Result<(BridgeSolution, Vec<PathBuf>), CliError> {
        let c = self.config();
        let sol = solve_with(&self.mu0, &self.mu1, c.eps, &c.solver.options(), None)?;
        let diag = out.write(DIAGNOSTICS_FILE, &diagnostics_csv(&sol))?;
        args.say(format!(
            "solve: {} after {} iterations (residuals {:e}, {:e})",
            if sol.converged() { "converged" } else { "not converged" },
            sol.iterations(),
            sol.residual0(),
            sol.residual1()
        ));
        sol.ensure_converged()?;
        Ok((sol, vec![diag]))
    }
}

pub fn cmd_solve(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = Prepared::load(args)?;
    let out = prep.output()?;
    let (sol, mut written) = prep.solve(&out, args)?;
    let cost = entropic_cost_primal(&sol)?;
    args.say(format!("solve: entropic cost {cost}"));
    written.push(out.write(SOLUTION_FILE, &solution_json(&prep.config().grid, &sol))?);
    Ok(written)
}

pub fn cmd_interpolate(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = Prepared::load(args)?;
    let out = prep.output()?;
    let (sol, mut written) = prep.solve(&out, args)?;
    let ic = prep.config().interpolation;
    let path = sample_path(&sol, ic.s_count)?;
    let mut rows = Vec::with_capacity(path.len());
    for sample in &path {
        let (res_phi, res_psi) = hjb_residuals(&sol, sample.s, ic.ds)?;
        let res_mu = transport_residual(&sol, sample.s, ic.ds)?;
        rows.push(vec![
            sample.s,
            sample.h,
            sample.h_prime,
            sample.h_second,
            sample.psi_exp,
            res_phi,
            res_psi,
            res_mu,
        ]);
    }
    let columns = [
        "s",
        "h",
        "h_prime",
        "h_second",
        "psi_exp",
        "hjb_res_phi",
        "hjb_res_psi",
        "transport_res",
    ];
    written.push(out.write(INTERP_FILE, &csv_table(&columns, &rows))?);
    args.say(format!("interpolate: {} samples", rows.len()));
    Ok(written)
}

fn converged_cost(mu0: &Density, mu1: &Density, eps: f64, config: &RunConfig) -> Result<f64, CliError> {
    let sol = solve_with(mu0, mu1, eps, &config.solver.options(), None)?;
    sol.ensure_converged()?;
    Ok(entropic_cost_primal(&sol)?)
}

pub fn cmd_sweep(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = Prepared::load(args)?;
    let sweep = prep.config().sweep()?;
    let (mu0, mu1) = (&prep.mu0, &prep.mu1);
    let (columns, rows): (Vec<&str>, Vec<Vec<f64>>) = match sweep {
        Sweep::Eps(list) => {
            let w2 = if prep.grid.dim() == 1 {
                wasserstein2_squared_1d(mu0, mu1)?
            } else {
                f64::NAN
            };
            let (h0, h1) = (relative_entropy(mu0), relative_entropy(mu1));
            let mut rows = Vec::new();
            for eps in list {
                let cost = converged_cost(mu0, mu1, eps, prep.config())?;
                args.say(format!("sweep: eps {eps} cost {cost}"));
                rows.push(vec![eps, cost, w2, h0, h1]);
            }
            (vec!["eps", "cost", "w2_squared", "h_mu0", "h_mu1"], rows)
        }
        Sweep::Time(list) => {
            let n = prep.grid.dim() as f64;
            let mut rows = Vec::new();
            for t in list {
                let u = heat_flow(mu0, t)?;
                let v = heat_flow(mu1, t)?;
                let cost = converged_cost(&u, &v, prep.config().eps, prep.config())?;
                let (h_u, h_v) = (relative_entropy(&u), relative_entropy(&v));
                let sinh2 = ((h_u - h_v) / (2.0 * n)).sinh().powi(2);
                args.say(format!("sweep: t {t} cost {cost}"));
                rows.push(vec![t, cost, h_u, h_v, sinh2]);
            }
            (vec!["t", "cost", "h_u", "h_v", "sinh2_n"], rows)
        }
    };
    let out = prep.output()?;
    Ok(vec![out.write(SWEEP_FILE, &csv_table(&columns, &rows))?])
}

/// Runs the heat-flow entropy check on both marginals and keeps the worse verdict.
fn costa_both(mu0: &Density, mu1: &Density, n: usize, times: &[f64], slack: f64) -> Result<CheckResult, CliError> {
    let a = check_costa_heat_flow(mu0, n, times, slack)?;
    let b = check_costa_heat_flow(mu1, n, times, slack)?;
    let mut details = Vec::with_capacity(a.details.len() + b.details.len());
    for (r, tag) in [(&a, "mu0"), (&b, "mu1")] {
        details.extend(r.details.iter().cloned().map(|mut d| {
            d.label = format!("{tag}:{}", d.label);
            d
        }));
    }
    let worst = if b.worst_margin < a.worst_margin { &b } else { &a };
    Ok(CheckResult {
        passed: a.passed && b.passed,
        details,
        ..worst.clone()
    })
}

pub fn run_checks(
    config: &RunConfig,
    grid: &Arc<Grid>,
    mu0: &Density,
    mu1: &Density,
    names: &[String],
    say: impl Fn(&str),
) -> Result<Vec<CheckResult>, CliError> {
    let n = grid.dim();
    let p = &config.verify.params;
    let model = CostModel {
        eps: config.eps,
        solver: config.solver.options(),
    };
    let mut base: Option<BridgeSolution> = None;
    let mut results = Vec::with_capacity(names.len());
    for name in names {
        let slack = config.slack(name);
        let result = match name.as_str() {
            CONCAVITY => {
                if base.is_none() {
                    let sol = solve_with(mu0, mu1, config.eps, &model.solver, None)?;
                    sol.ensure_converged()?;
                    base = Some(sol);
                }
                let sol = base.as_ref().expect("solved above");
                check_concavity(sol, n, config.interpolation.s_count, slack)?
            }
            COSTA => costa_both(mu0, mu1, n, &p.costa_times, slack)?,
            REGULARITY => check_regularity_identity(mu0, mu1, &model, &p.regularity_dt, slack)?,
            EVI => check_evi(mu0, mu1, n, &model, &p.evi_times, slack)?,
            INTEGRAL_EVI => check_integral_evi(mu0, mu1, n, &model, &p.integral_evi_times, slack)?,
            CONTRACTION => check_contraction(mu0, mu1, n, &model, p.contraction_tau, p.contraction_points, slack)?,
            EPSILON_LIMIT => check_epsilon_limit(mu0, mu1, &p.eps_list, &model.solver, slack)?,
            EVI_W2 => check_evi_w2(mu0, mu1, &p.evi_w2_times, p.evi_w2_eps_small, &model.solver, slack)?,
            other => return Err(CliError::Usage(format!("unknown check '{other}'"))),
        };
        say(&format!(
            "verify: {:<14} {} worst margin {:e} (slack {:e})",
            result.name,
            if result.passed { "PASS" } else { "FAIL" },
            result.worst_margin,
            result.slack
        ));
        results.push(result);
    }
    Ok(results)
}

pub fn cmd_verify(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = Prepared::load(args)?;
    let names = prep.config().selected_checks(args.checks.as_deref())?;
    let results = run_checks(prep.config(), &prep.grid, &prep.mu0, &prep.mu1, &names, |m| args.say(m))?;
    let out = prep.output()?;
    let report = out.write(REPORT_FILE, &report_json(&results))?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::VerificationFailed(format!(
            "{} (report at {})",
            failed.join(", "),
            report.display()
        )));
    }
    Ok(vec![report])
}

/// `--out`, else the config's `output`, else `./out`.
pub fn resolve_out_dir(args: &RunArgs, config: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| Path::new(DEFAULT_OUT_DIR).to_path_buf())
}

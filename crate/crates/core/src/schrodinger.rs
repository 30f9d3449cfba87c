//! Log-domain IPFP (Sinkhorn) solver for the Schrödinger system
//! `mu0 = f * T_1 g`, `mu1 = g * T_1 f` against the eps-heat kernel.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_values, same_grid, Density, Grid, ScalarField, MASS_DEFECT_TOL};
use crate::heat::HeatKernel;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Floor on the log-domain stopping threshold; log-potentials reach |.| ~ 700
/// where one ulp is already ~1e-13.
pub const LOG_RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

/// Marginal residuals observed before the update of a given iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual0: f64,
    pub residual1: f64,
}

/// Log-potentials of the Schrödinger system together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct BridgeSolution {
    grid: Arc<Grid>,
    eps: f64,
    log_f: ScalarField,
    log_g: ScalarField,
    mu0: Density,
    mu1: Density,
    iterations: usize,
    residual0: f64,
    residual1: f64,
    converged: bool,
    history: Vec<IterationRecord>,
}

impl BridgeSolution {
    /// Wraps externally supplied potentials; residuals are evaluated, `converged`
    /// records whether both are within `tol`.
    pub fn from_potentials(
        mu0: Density,
        mu1: Density,
        eps: f64,
        log_f: ScalarField,
        log_g: ScalarField,
        tol: f64,
    ) -> Result<Self> {
        same_grid(mu0.grid(), mu1.grid())?;
        same_grid(mu0.grid(), log_f.grid())?;
        same_grid(mu0.grid(), log_g.grid())?;
        let kernel = HeatKernel::new(mu0.grid(), 1.0, eps)?;
        let ltg = kernel.apply_log_values(log_g.values());
        let ltf = kernel.apply_log_values(log_f.values());
        let residual0 = sup_residual(log_f.values(), &ltg, mu0.values());
        let residual1 = sup_residual(log_g.values(), &ltf, mu1.values());
        Ok(Self {
            grid: mu0.grid().clone(),
            eps,
            log_f,
            log_g,
            mu0,
            mu1,
            iterations: 0,
            residual0,
            residual1,
            converged: residual0 <= tol && residual1 <= tol,
            history: vec![IterationRecord {
                iteration: 0,
                residual0,
                residual1,
            }],
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn log_f(&self) -> &ScalarField {
        &self.log_f
    }

    pub fn log_g(&self) -> &ScalarField {
        &self.log_g
    }

    pub fn mu0(&self) -> &Density {
        &self.mu0
    }

    pub fn mu1(&self) -> &Density {
        &self.mu1
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual0(&self) -> f64 {
        self.residual0
    }

    pub fn residual1(&self) -> f64 {
        self.residual1
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    /// Turns an unconverged solution into `Error::NotConverged`.
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual0: self.residual0,
                residual1: self.residual1,
            })
        }
    }
}

/// `(sup|f T_1 g - mu0|, sup|g T_1 f - mu1|)`, recomputed from the potentials.
pub fn marginal_residuals(solution: &BridgeSolution) -> Result<(f64, f64)> {
    let kernel = HeatKernel::new(&solution.grid, 1.0, solution.eps)?;
    let ltg = kernel.apply_log_values(solution.log_g.values());
    let ltf = kernel.apply_log_values(solution.log_f.values());
    Ok((
        sup_residual(solution.log_f.values(), &ltg, solution.mu0.values()),
        sup_residual(solution.log_g.values(), &ltf, solution.mu1.values()),
    ))
}

fn sup_residual(log_a: &[f64], log_tb: &[f64], target: &[f64]) -> f64 {
    log_a
        .iter()
        .zip(log_tb)
        .zip(target)
        .fold(0.0, |m, ((a, b), t)| m.max(((a + b).exp() - t).abs()))
}

fn sup_log_residual(log_a: &[f64], log_tb: &[f64], log_target: &[f64]) -> f64 {
    log_a
        .iter()
        .zip(log_tb)
        .zip(log_target)
        .fold(0.0, |m, ((a, b), t)| m.max((a + b - t).abs()))
}

/// Solves with a cold start `log f = log g = 0`.
pub fn solve_system(mu0: &Density, mu1: &Density, eps: f64, max_iter: usize, tol: f64) -> Result<BridgeSolution> {
    solve_with(mu0, mu1, eps, &SolverOptions { max_iter, tol }, None)
}

/// Solves the system, optionally warm-starting from a previous `log g`.
///
/// Stops once both sup-norm marginal residuals are within `tol` and the same holds
/// for the log-domain residuals `sup|log(f T_1 g) - log mu0|` (floored at
/// `LOG_RESIDUAL_FLOOR`). The second test controls the potentials uniformly, including
/// in the tails where the absolute residual says nothing.
///
/// Running out of iterations is not an error: the returned solution carries
/// `converged = false` and the full residual history.
pub fn solve_with(
    mu0: &Density,
    mu1: &Density,
    eps: f64,
    options: &SolverOptions,
    initial_log_g: Option<&[f64]>,
) -> Result<BridgeSolution> {
    same_grid(mu0.grid(), mu1.grid())?;
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("solver tolerance must be positive, got {}", options.tol)));
    }
    let grid = mu0.grid().clone();
    let kernel = HeatKernel::new(&grid, 1.0, eps)?;
    mu0.check_support_margin(eps, MASS_DEFECT_TOL)?;
    mu1.check_support_margin(eps, MASS_DEFECT_TOL)?;

    let log_mu0 = mu0.log_values();
    let log_mu1 = mu1.log_values();
    let n = grid.len();
    let mut lf = vec![0.0; n];
    let mut lg = match initial_log_g {
        Some(v) if v.len() != n => return Err(Error::LengthMismatch { expected: n, got: v.len() }),
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut ltf = kernel.apply_log_values(&lf);

    let mut history = Vec::new();
    let mut iteration = 0;
    let (residual0, residual1, converged) = loop {
        let ltg = kernel.apply_log_values(&lg);
        let r0 = sup_residual(&lf, &ltg, mu0.values());
        let r1 = sup_residual(&lg, &ltf, mu1.values());
        let lr0 = sup_log_residual(&lf, &ltg, &log_mu0);
        let lr1 = sup_log_residual(&lg, &ltf, &log_mu1);
        history.push(IterationRecord {
            iteration,
            residual0: r0,
            residual1: r1,
        });
        let log_tol = options.tol.max(LOG_RESIDUAL_FLOOR);
        if r0 <= options.tol && r1 <= options.tol && lr0 <= log_tol && lr1 <= log_tol {
            break (r0, r1, true);
        }
        if iteration >= options.max_iter {
            break (r0, r1, false);
        }
        for i in 0..n {
            lf[i] = log_mu0[i] - ltg[i];
        }
        ltf = kernel.apply_log_values(&lf);
        for i in 0..n {
            lg[i] = log_mu1[i] - ltf[i];
        }
        iteration += 1;
    };

    // gauge: split the free constant so that int log g dmu1 = int log f dmu0
    let weighted = |logs: &[f64], mu: &Density| {
        let v: Vec<f64> = logs.iter().zip(mu.values()).map(|(l, m)| l * m).collect();
        integrate_values(&grid, &v)
    };
    let c = 0.5 * (weighted(&lg, mu1)? - weighted(&lf, mu0)?);
    lf.iter_mut().for_each(|v| *v += c);
    lg.iter_mut().for_each(|v| *v -= c);

    Ok(BridgeSolution {
        log_f: ScalarField::new(grid.clone(), lf)?,
        log_g: ScalarField::new(grid.clone(), lg)?,
        grid,
        eps,
        mu0: mu0.clone(),
        mu1: mu1.clone(),
        iterations: iteration,
        residual0,
        residual1,
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn normal(grid: &Arc<Grid>, m: f64, s: f64) -> Density {
        let f = ScalarField::from_fn(grid.clone(), |x| {
            (-(x[0] - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
        })
        .unwrap();
        Density::normalize(f).unwrap()
    }

    fn fixture() -> (Density, Density) {
        let g = build_grid(1, -14.0, 14.0, 561).unwrap();
        (normal(&g, -2.0, 1.0), normal(&g, 2.0, 1.0))
    }

    fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn benchmark_pair_converges() {
        let (mu0, mu1) = fixture();
        let sol = solve_system(&mu0, &mu1, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        assert!(sol.converged());
        assert!(sol.residual0() <= 1e-9 && sol.residual1() <= 1e-9);
        let (r0, r1) = marginal_residuals(&sol).unwrap();
        // the gauge shift is exact up to rounding of the exponentials
        assert!(r0 <= 1e-9 && r1 <= 1e-9);
    }

    #[test]
    fn equal_marginals_give_equal_potentials() {
        let g = build_grid(1, -14.0, 14.0, 561).unwrap();
        let mu = normal(&g, 0.0, 1.0);
        let sol = solve_system(&mu, &mu, 1.0, DEFAULT_MAX_ITER, 1e-12).unwrap();
        assert!(sup_diff(sol.log_f(), sol.log_g()) <= 1e-10);
    }

    #[test]
    fn swapping_marginals_swaps_potentials() {
        let (mu0, mu1) = fixture();
        let fwd = solve_system(&mu0, &mu1, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let rev = solve_system(&mu1, &mu0, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        assert!(sup_diff(fwd.log_f(), rev.log_g()) <= 1e-9, "{}", sup_diff(fwd.log_f(), rev.log_g()));
        assert!(sup_diff(fwd.log_g(), rev.log_f()) <= 1e-9);
    }

    #[test]
    fn cold_start_residual_is_definitional() {
        let (mu0, mu1) = fixture();
        let sol = solve_system(&mu0, &mu1, 1.0, 0, 1e-9).unwrap();
        assert!(!sol.converged());
        assert_eq!(sol.iterations(), 0);
        let k = HeatKernel::new(mu0.grid(), 1.0, 1.0).unwrap();
        let t1 = k.apply_values(&vec![1.0; mu0.grid().len()]);
        let expected = mu0
            .values()
            .iter()
            .zip(&t1)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!((sol.history()[0].residual0 - expected).abs() <= 1e-14);
        assert!(sol.ensure_converged().is_err());
    }

    #[test]
    fn residuals_decrease_on_benchmark() {
        let (mu0, mu1) = fixture();
        let sol = solve_system(&mu0, &mu1, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let h = sol.history();
        for w in h[1..].windows(2) {
            assert!(w[1].residual0 <= w[0].residual0, "{:?}", w);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (mu0, mu1) = fixture();
        let sol = solve_system(&mu0, &mu1, 1.0, 10, 1e-15).unwrap();
        assert!(!sol.converged());
        assert_eq!(sol.iterations(), 10);
        assert_eq!(sol.history().len(), 11);
        assert!(matches!(sol.ensure_converged(), Err(Error::NotConverged { iterations: 10, .. })));
    }

    #[test]
    fn small_eps_stays_finite() {
        let g = build_grid(1, -14.0, 14.0, 601).unwrap();
        let (mu0, mu1) = (normal(&g, -2.0, 1.0), normal(&g, 2.0, 1.0));
        let sol = solve_system(&mu0, &mu1, 0.05, DEFAULT_MAX_ITER, 1e-9).unwrap();
        assert!(sol.converged());
        assert!(sol.log_f().values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn warm_start_converges_faster() {
        let (mu0, mu1) = fixture();
        let cold = solve_system(&mu0, &mu1, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let warm = solve_with(&mu0, &mu1, 1.0, &SolverOptions::default(), Some(cold.log_g().values())).unwrap();
        assert!(warm.converged());
        assert!(warm.iterations() < cold.iterations());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mu0, mu1) = fixture();
        assert!(matches!(solve_system(&mu0, &mu1, 0.0, 10, 1e-9), Err(Error::InvalidEps(_))));
        assert!(solve_system(&mu0, &mu1, 1.0, 10, 0.0).is_err());
        let other = build_grid(1, -14.0, 14.0, 281).unwrap();
        assert_eq!(
            solve_system(&mu0, &normal(&other, 0.0, 1.0), 1.0, 10, 1e-9).unwrap_err(),
            Error::GridMismatch
        );
        let narrow = build_grid(1, -4.0, 4.0, 161).unwrap();
        let edge = normal(&narrow, 0.0, 1.0);
        assert!(matches!(
            solve_system(&edge, &edge, 1.0, 10, 1e-9),
            Err(Error::SupportMargin { .. })
        ));
    }

    #[test]
    fn gauge_rescaling_keeps_residuals() {
        let (mu0, mu1) = fixture();
        let sol = solve_system(&mu0, &mu1, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let shifted = BridgeSolution::from_potentials(
            mu0.clone(),
            mu1.clone(),
            1.0,
            sol.log_f().map(|v| v + 0.7).unwrap(),
            sol.log_g().map(|v| v - 0.7).unwrap(),
            1e-9,
        )
        .unwrap();
        assert!(shifted.converged());
        assert!((shifted.residual0() - sol.residual0()).abs() <= 1e-12);
    }
}

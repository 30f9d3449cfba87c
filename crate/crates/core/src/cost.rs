//! Entropic cost in static (primal), dual and dynamic (Benamou-Brenier) form,
//! the eps-entropic cost, and the one-dimensional quadratic Wasserstein oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_values, relative_entropy, same_grid, Density, ScalarField};
use crate::heat::HeatKernel;
use crate::interpolation::{sample_path, InterpolationSample};
use crate::schrodinger::{solve_with, BridgeSolution, SolverOptions};
use crate::grid::gradient_values;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub primal: f64,
    pub dual: f64,
    pub bb: f64,
    pub eps: f64,
    pub h_mu0: f64,
    pub h_mu1: f64,
    pub gap_primal_dual: f64,
    pub gap_primal_bb: f64,
}

fn weighted_integral(values: &[f64], mu: &Density) -> Result<f64> {
    let v: Vec<f64> = values.iter().zip(mu.values()).map(|(a, m)| a * m).collect();
    integrate_values(mu.grid(), &v)
}

/// `eps (int log f dmu0 + int log g dmu1) - eps/2 (H(mu0) + H(mu1))`.
pub fn entropic_cost_primal(solution: &BridgeSolution) -> Result<f64> {
    solution.ensure_converged()?;
    let eps = solution.eps();
    let a = weighted_integral(solution.log_f().values(), solution.mu0())?;
    let b = weighted_integral(solution.log_g().values(), solution.mu1())?;
    let h0 = relative_entropy(solution.mu0());
    let h1 = relative_entropy(solution.mu1());
    Ok(eps * (a + b) - 0.5 * eps * (h0 + h1))
}

/// Dual objective at the potential `log g`.
pub fn entropic_cost_dual(solution: &BridgeSolution) -> Result<f64> {
    solution.ensure_converged()?;
    dual_value(solution, solution.log_g())
}

/// `eps (int psi dmu1 - int log T_1 e^psi dmu0) + eps/2 (H(mu0) - H(mu1))` for any `psi`.
pub fn dual_value(solution: &BridgeSolution, psi: &ScalarField) -> Result<f64> {
    same_grid(solution.grid(), psi.grid())?;
    let eps = solution.eps();
    let q = HeatKernel::new(solution.grid(), 1.0, eps)?.apply_log_values(psi.values());
    let a = weighted_integral(psi.values(), solution.mu1())?;
    let b = weighted_integral(&q, solution.mu0())?;
    let h0 = relative_entropy(solution.mu0());
    let h1 = relative_entropy(solution.mu1());
    Ok(eps * (a - b) + 0.5 * eps * (h0 - h1))
}

/// Instantaneous kinetic energy `eps^2 / 2 int (|grad theta|^2 + |grad log mu|^2 / 4) dmu`.
pub fn kinetic_energy(sample: &InterpolationSample) -> Result<f64> {
    let grid = sample.grid();
    let gt = gradient_values(grid, &sample.theta_values());
    let gl = gradient_values(grid, &sample.log_mu_values());
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| {
            let cur: f64 = gt.iter().map(|g| g[i] * g[i]).sum();
            let osm: f64 = gl.iter().map(|g| g[i] * g[i]).sum();
            sample.mu_s.values()[i] * (cur + 0.25 * osm)
        })
        .collect();
    Ok(0.5 * sample.eps * sample.eps * integrate_values(grid, &integrand)?)
}

/// Trapezoid rule in `s` of the kinetic energy over `s_count` uniform samples.
pub fn benamou_brenier_value(solution: &BridgeSolution, s_count: usize) -> Result<f64> {
    if s_count < 9 || s_count.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("s_count must be odd and at least 9, got {s_count}")));
    }
    solution.ensure_converged()?;
    let path = sample_path(solution, s_count)?;
    let energies = path.iter().map(kinetic_energy).collect::<Result<Vec<_>>>()?;
    let ds = 1.0 / (s_count - 1) as f64;
    let inner: f64 = energies[1..s_count - 1].iter().sum();
    Ok(ds * (inner + 0.5 * (energies[0] + energies[s_count - 1])))
}

pub fn cost_breakdown(solution: &BridgeSolution, s_count: usize) -> Result<CostBreakdown> {
    let primal = entropic_cost_primal(solution)?;
    let dual = entropic_cost_dual(solution)?;
    let bb = benamou_brenier_value(solution, s_count)?;
    Ok(CostBreakdown {
        primal,
        dual,
        bb,
        eps: solution.eps(),
        h_mu0: relative_entropy(solution.mu0()),
        h_mu1: relative_entropy(solution.mu1()),
        gap_primal_dual: (primal - dual).abs(),
        gap_primal_bb: (primal - bb).abs(),
    })
}

/// `A^eps(mu0, mu1)` with default solver options.
pub fn epsilon_cost(mu0: &Density, mu1: &Density, eps: f64) -> Result<f64> {
    epsilon_cost_with(mu0, mu1, eps, &SolverOptions::default())
}

pub fn epsilon_cost_with(mu0: &Density, mu1: &Density, eps: f64, options: &SolverOptions) -> Result<f64> {
    entropic_cost_primal(&solve_with(mu0, mu1, eps, options, None)?)
}

/// Cumulative trapezoid masses at the nodes, scaled to end at exactly 1.
fn node_cdf(mu: &Density) -> Vec<f64> {
    let h = mu.grid().spacing(0);
    let v = mu.values();
    let mut cdf = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cdf.push(acc);
    }
    cdf.iter().map(|c| c / acc).collect()
}

/// `W2^2 = int_0^1 |F0^{-1}(q) - F1^{-1}(q)|^2 dq` with piecewise-linear CDFs.
///
/// Both quantile functions are linear between the merged CDF breakpoints, so the
/// integral is evaluated exactly on each piece.
pub fn wasserstein2_squared_1d(mu0: &Density, mu1: &Density) -> Result<f64> {
    for mu in [mu0, mu1] {
        if mu.grid().dim() != 1 {
            return Err(Error::WrongDimension {
                expected: 1,
                got: mu.grid().dim(),
            });
        }
    }
    let (f0, f1) = (node_cdf(mu0), node_cdf(mu1));
    let (g0, g1) = (mu0.grid().axis(0), mu1.grid().axis(0));
    let quantile = |f: &[f64], axis: &crate::grid::Axis, i: usize, q: f64| {
        axis.coord(i) + axis.spacing() * (q - f[i]) / (f[i + 1] - f[i])
    };
    let next_cell = |f: &[f64], mut i: usize| {
        while i + 1 < f.len() && f[i + 1] <= f[i] {
            i += 1;
        }
        i
    };
    let (mut i, mut j) = (next_cell(&f0, 0), next_cell(&f1, 0));
    let mut q = 0.0;
    let mut total = 0.0;
    while i + 1 < f0.len() && j + 1 < f1.len() {
        let q_end = f0[i + 1].min(f1[j + 1]);
        if q_end > q {
            let d_start = quantile(&f0, g0, i, q) - quantile(&f1, g1, j, q);
            let d_end = quantile(&f0, g0, i, q_end) - quantile(&f1, g1, j, q_end);
            total += (q_end - q) * (d_start * d_start + d_start * d_end + d_end * d_end) / 3.0;
            q = q_end;
        }
        if f0[i + 1] <= q {
            i = next_cell(&f0, i + 1);
        }
        if f1[j + 1] <= q {
            j = next_cell(&f1, j + 1);
        }
    }
    Ok(total)
}

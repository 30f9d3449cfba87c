//! Entropic interpolation `mu_s = T_s f * T_{1-s} g` between the marginals of a solved
//! Schrödinger system, with its potentials, velocities and entropy derivatives.
//!
//! All dynamic quantities carry the eps scaling of the generator `eps * Delta / 2`:
//! velocities are `eps` times the potential gradients, so
//! `h'(s) = eps int grad(theta) . grad(mu)` and
//! `h''(s) = eps^2 int (|Hess theta|^2 + |Hess log mu|^2 / 4) dmu`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    axis_derivative, entropy_of_values, gradient_values, hessian_frobenius_sq_values, integrate_values,
    laplacian_values, Density, Grid, ScalarField, VectorField,
};
use crate::heat::HeatKernel;
use crate::schrodinger::BridgeSolution;

/// Nodes with `mu_s` below this are excluded from sup-norm diagnostics.
pub const BULK_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_S_COUNT: usize = 65;
pub const DEFAULT_DS: f64 = 1e-3;

/// Snapshot of the interpolation at time `s`.
#[derive(Debug, Clone)]
pub struct InterpolationSample {
    pub s: f64,
    pub eps: f64,
    pub mu_s: Density,
    /// `log T_s f`
    pub phi_s: ScalarField,
    /// `log T_{1-s} g`
    pub psi_s: ScalarField,
    pub h: f64,
    pub h_prime: f64,
    pub h_second: f64,
    /// `exp(-h / n)` with `n` the grid dimension.
    pub psi_exp: f64,
}

impl InterpolationSample {
    pub fn grid(&self) -> &Arc<Grid> {
        self.mu_s.grid()
    }

    /// `theta = (psi - phi) / 2`
    pub fn theta_values(&self) -> Vec<f64> {
        self.phi_s
            .values()
            .iter()
            .zip(self.psi_s.values())
            .map(|(p, q)| 0.5 * (q - p))
            .collect()
    }

    /// `phi + psi = log mu_s`, without the density floor.
    pub fn log_mu_values(&self) -> Vec<f64> {
        self.phi_s.values().iter().zip(self.psi_s.values()).map(|(p, q)| p + q).collect()
    }

    pub fn in_bulk(&self, i: usize) -> bool {
        self.mu_s.values()[i] >= BULK_THRESHOLD
    }
}

/// Forward, backward, current and osmotic velocities at one time.
#[derive(Debug, Clone)]
pub struct VelocityBundle {
    pub s: f64,
    /// `eps grad theta`
    pub current: VectorField,
    /// `eps/2 grad log mu`
    pub osmotic: VectorField,
    /// `eps grad psi`
    pub forward: VectorField,
    /// `eps grad phi`
    pub backward: VectorField,
}

fn check_time(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::OutOfRange(s))
    }
}

fn phi_at(solution: &BridgeSolution, s: f64) -> Result<Vec<f64>> {
    Ok(HeatKernel::new(solution.grid(), s, solution.eps())?.apply_log_values(solution.log_f().values()))
}

fn psi_at(solution: &BridgeSolution, s: f64) -> Result<Vec<f64>> {
    Ok(HeatKernel::new(solution.grid(), 1.0 - s, solution.eps())?.apply_log_values(solution.log_g().values()))
}

fn mu_values(phi: &[f64], psi: &[f64]) -> Vec<f64> {
    phi.iter().zip(psi).map(|(p, q)| (p + q).exp()).collect()
}

pub fn interpolate(solution: &BridgeSolution, s: f64) -> Result<InterpolationSample> {
    check_time(s)?;
    let grid = solution.grid().clone();
    let phi = phi_at(solution, s)?;
    let psi = psi_at(solution, s)?;
    let mu_s = Density::new(ScalarField::new(grid.clone(), mu_values(&phi, &psi))?)?;
    let mut sample = InterpolationSample {
        s,
        eps: solution.eps(),
        h: entropy_of_values(&grid, mu_s.values()),
        mu_s,
        phi_s: ScalarField::new(grid.clone(), phi)?,
        psi_s: ScalarField::new(grid.clone(), psi)?,
        h_prime: 0.0,
        h_second: 0.0,
        psi_exp: 0.0,
    };
    sample.h_prime = entropy_first_derivative(&sample)?;
    sample.h_second = entropy_second_derivative(&sample)?;
    sample.psi_exp = (-sample.h / grid.dim() as f64).exp();
    Ok(sample)
}

/// `s_count` uniformly spaced samples on `[0, 1]`, ascending in `s`.
pub fn sample_path(solution: &BridgeSolution, s_count: usize) -> Result<Vec<InterpolationSample>> {
    if s_count < 2 {
        return Err(Error::InvalidArgument(format!("s_count must be at least 2, got {s_count}")));
    }
    (0..s_count)
        .into_par_iter()
        .map(|k| interpolate(solution, k as f64 / (s_count - 1) as f64))
        .collect()
}

fn scaled_gradient(grid: &Arc<Grid>, values: &[f64], scale: f64) -> Result<VectorField> {
    let comps = gradient_values(grid, values)
        .into_iter()
        .map(|c| ScalarField::new(grid.clone(), c.into_iter().map(|v| scale * v).collect()))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

pub fn velocities(solution: &BridgeSolution, s: f64) -> Result<VelocityBundle> {
    check_time(s)?;
    let grid = solution.grid();
    let eps = solution.eps();
    let phi = phi_at(solution, s)?;
    let psi = psi_at(solution, s)?;
    let theta: Vec<f64> = phi.iter().zip(&psi).map(|(p, q)| 0.5 * (q - p)).collect();
    let log_mu: Vec<f64> = phi.iter().zip(&psi).map(|(p, q)| p + q).collect();
    Ok(VelocityBundle {
        s,
        current: scaled_gradient(grid, &theta, eps)?,
        osmotic: scaled_gradient(grid, &log_mu, 0.5 * eps)?,
        forward: scaled_gradient(grid, &psi, eps)?,
        backward: scaled_gradient(grid, &phi, eps)?,
    })
}

/// `h'(s) = eps int mu grad(theta) . grad(log mu)`.
pub fn entropy_first_derivative(sample: &InterpolationSample) -> Result<f64> {
    let grid = sample.grid();
    let gt = gradient_values(grid, &sample.theta_values());
    let gl = gradient_values(grid, &sample.log_mu_values());
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| {
            let dot: f64 = gt.iter().zip(&gl).map(|(a, b)| a[i] * b[i]).sum();
            sample.mu_s.values()[i] * dot
        })
        .collect();
    Ok(sample.eps * integrate_values(grid, &integrand)?)
}

/// `h''(s) = eps^2 int (|Hess theta|^2 + |Hess log mu|^2 / 4) dmu`.
pub fn entropy_second_derivative(sample: &InterpolationSample) -> Result<f64> {
    let grid = sample.grid();
    let ht = hessian_frobenius_sq_values(grid, &sample.theta_values());
    let hl = hessian_frobenius_sq_values(grid, &sample.log_mu_values());
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| sample.mu_s.values()[i] * (ht[i] + 0.25 * hl[i]))
        .collect();
    Ok(sample.eps * sample.eps * integrate_values(grid, &integrand)?)
}

/// Second-order derivative in `s` of a family of node vectors: central inside,
/// one-sided within `ds` of an end.
fn time_derivative(s: f64, ds: f64, at: impl Fn(f64) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    if !(ds > 0.0 && ds < 0.25) {
        return Err(Error::InvalidArgument(format!("ds must lie in (0, 0.25), got {ds}")));
    }
    let combine = |terms: Vec<(f64, Vec<f64>)>| -> Vec<f64> {
        let n = terms[0].1.len();
        (0..n).map(|i| terms.iter().map(|(c, v)| c * v[i]).sum::<f64>() / ds).collect()
    };
    Ok(if s - ds < 0.0 {
        combine(vec![(-1.5, at(s)?), (2.0, at(s + ds)?), (-0.5, at(s + 2.0 * ds)?)])
    } else if s + ds > 1.0 {
        combine(vec![(1.5, at(s)?), (-2.0, at(s - ds)?), (0.5, at(s - 2.0 * ds)?)])
    } else {
        combine(vec![(0.5, at(s + ds)?), (-0.5, at(s - ds)?)])
    })
}

fn bulk_sup(sample: &InterpolationSample, values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| sample.in_bulk(*i))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Bulk sup-norms of `d_s phi - eps/2 (Lap phi + |grad phi|^2)` and
/// `d_s psi + eps/2 (Lap psi + |grad psi|^2)`.
pub fn hjb_residuals(solution: &BridgeSolution, s: f64, ds: f64) -> Result<(f64, f64)> {
    let sample = interpolate(solution, s)?;
    let grid = solution.grid();
    let half_eps = 0.5 * solution.eps();
    let dphi = time_derivative(s, ds, |t| phi_at(solution, t))?;
    let dpsi = time_derivative(s, ds, |t| psi_at(solution, t))?;
    let generator = |v: &[f64]| -> Vec<f64> {
        let lap = laplacian_values(grid, v);
        let grad = gradient_values(grid, v);
        (0..v.len())
            .map(|i| half_eps * (lap[i] + grad.iter().map(|g| g[i] * g[i]).sum::<f64>()))
            .collect()
    };
    let gphi = generator(sample.phi_s.values());
    let gpsi = generator(sample.psi_s.values());
    let res_phi: Vec<f64> = dphi.iter().zip(&gphi).map(|(a, b)| a - b).collect();
    let res_psi: Vec<f64> = dpsi.iter().zip(&gpsi).map(|(a, b)| a + b).collect();
    Ok((bulk_sup(&sample, &res_phi), bulk_sup(&sample, &res_psi)))
}

/// Bulk sup-norm of `d_s mu + div(mu eps grad theta)`.
pub fn transport_residual(solution: &BridgeSolution, s: f64, ds: f64) -> Result<f64> {
    let sample = interpolate(solution, s)?;
    let grid = solution.grid();
    let dmu = time_derivative(s, ds, |t| Ok(mu_values(&phi_at(solution, t)?, &psi_at(solution, t)?)))?;
    let grad_theta = gradient_values(grid, &sample.theta_values());
    let mut div = vec![0.0; grid.len()];
    for (axis, g) in grad_theta.iter().enumerate() {
        let flux: Vec<f64> = g
            .iter()
            .zip(sample.mu_s.values())
            .map(|(d, m)| solution.eps() * d * m)
            .collect();
        for (acc, v) in div.iter_mut().zip(axis_derivative(grid, &flux, axis, 1)) {
            *acc += v;
        }
    }
    let res: Vec<f64> = dmu.iter().zip(&div).map(|(a, b)| a + b).collect();
    Ok(bulk_sup(&sample, &res))
}

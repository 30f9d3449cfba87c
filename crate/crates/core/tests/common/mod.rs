//! Closed-form oracles for one-dimensional Gaussian marginals, independent of the
//! grid code: the entropic problem between Gaussians has a Gaussian solution.
#![allow(dead_code)]

use std::f64::consts::{E, PI};
use std::sync::Arc;

use entropic_core::{build_grid, gaussian_density, Density, GaussianSpec, Grid};

pub fn gaussian_entropy(sigma: f64) -> f64 {
    -0.5 * (2.0 * PI * E * sigma * sigma).ln()
}

/// Covariance of the optimal coupling between N(., a^2) and N(., b^2) at noise eps.
pub fn coupling_covariance(a: f64, b: f64, eps: f64) -> f64 {
    (-eps + (eps * eps + 4.0 * a * a * b * b).sqrt()) / 2.0
}

/// A^eps between N(m0, a^2) and N(m1, b^2).
pub fn entropic_cost(m0: f64, a: f64, m1: f64, b: f64, eps: f64) -> f64 {
    let c = coupling_covariance(a, b, eps);
    eps * (-(2.0 * PI * E).ln() - 0.5 * (a * a * b * b - c * c).ln())
        + 0.5 * ((m0 - m1).powi(2) + a * a + b * b - 2.0 * c)
        + 0.5 * eps * (2.0 * PI * eps).ln()
        - 0.5 * eps * (gaussian_entropy(a) + gaussian_entropy(b))
}

/// Variance of the interpolation at time s and its first two s-derivatives.
pub fn bridge_variance(a: f64, b: f64, eps: f64, s: f64) -> (f64, f64, f64) {
    let c = coupling_covariance(a, b, eps);
    let v = (1.0 - s).powi(2) * a * a + s * s * b * b + 2.0 * s * (1.0 - s) * c + eps * s * (1.0 - s);
    let dv = -2.0 * (1.0 - s) * a * a + 2.0 * s * b * b + 2.0 * (1.0 - 2.0 * s) * c + eps * (1.0 - 2.0 * s);
    let ddv = 2.0 * a * a + 2.0 * b * b - 4.0 * c - 2.0 * eps;
    (v, dv, ddv)
}

/// (h, h', h'') of the interpolation entropy.
pub fn bridge_entropy(a: f64, b: f64, eps: f64, s: f64) -> (f64, f64, f64) {
    let (v, dv, ddv) = bridge_variance(a, b, eps, s);
    (
        -0.5 * (2.0 * PI * E * v).ln(),
        -0.5 * dv / v,
        -0.5 * (ddv / v - (dv / v).powi(2)),
    )
}

pub fn benchmark_grid() -> Arc<Grid> {
    build_grid(1, -14.0, 14.0, 561).unwrap()
}

pub fn normal(grid: &Arc<Grid>, m: f64, s: f64) -> Density {
    gaussian_density(grid, &GaussianSpec::isotropic_1d(m, s)).unwrap()
}

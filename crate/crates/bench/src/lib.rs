//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use entropic_core::{build_grid, gaussian_density, Density, GaussianSpec, Grid};

/// Benchmark pair N(-2, 1), N(2, 1) on `[-14, 14]` with `points` nodes.
pub fn gaussian_pair(points: usize) -> (Arc<Grid>, Density, Density) {
    let grid = build_grid(1, -14.0, 14.0, points).expect("grid");
    let mu0 = gaussian_density(&grid, &GaussianSpec::isotropic_1d(-2.0, 1.0)).expect("mu0");
    let mu1 = gaussian_density(&grid, &GaussianSpec::isotropic_1d(2.0, 1.0)).expect("mu1");
    (grid, mu0, mu1)
}

/// Planar pair on `[-12, 12]^2` with `points` nodes per axis.
pub fn planar_pair(points: usize) -> (Arc<Grid>, Density, Density) {
    let grid = build_grid(2, -12.0, 12.0, points).expect("grid");
    let mu0 = gaussian_density(&grid, &GaussianSpec::new(vec![-1.0, 0.0], vec![1.0]).expect("spec")).expect("mu0");
    let mu1 = gaussian_density(&grid, &GaussianSpec::new(vec![1.0, 0.5], vec![1.0]).expect("spec")).expect("mu1");
    (grid, mu0, mu1)
}

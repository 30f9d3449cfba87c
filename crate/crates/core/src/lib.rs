//! Grid-based numerics for the Schrödinger problem with a Brownian reference:
//! heat semigroup, log-domain IPFP solver, entropic interpolation, entropic cost in
//! primal, dual and dynamic form, and executable checks of the convexity,
//! regularity, EVI, contraction and small-noise results along the heat flow.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod grid;
pub mod heat;
pub mod interpolation;
pub mod reference;
pub mod schrodinger;
pub mod verify;

pub use cost::{
    benamou_brenier_value, cost_breakdown, dual_value, entropic_cost_dual, entropic_cost_primal, epsilon_cost,
    epsilon_cost_with, wasserstein2_squared_1d, CostBreakdown,
};
pub use error::{Error, Result};
pub use grid::{
    build_grid, gradient, hessian_frobenius_sq, integrate, laplacian, relative_entropy, second_moment, Axis, Density,
    Grid, ScalarField, VectorField,
};
pub use heat::{heat_apply, joint_kernel, log_heat_apply, semigroup_symmetry_check, HeatKernel, JointKernel};
pub use interpolation::{
    entropy_first_derivative, entropy_second_derivative, hjb_residuals, interpolate, sample_path,
    transport_residual, velocities, InterpolationSample, VelocityBundle,
};
pub use reference::{
    gaussian_density, gaussian_entropy, gaussian_w2_squared, marginal_density, mixture_density, GaussianSpec,
    MarginalSpec, MixtureSpec,
};
pub use schrodinger::{marginal_residuals, solve_system, solve_with, BridgeSolution, IterationRecord, SolverOptions};
pub use verify::{heat_flow, CheckResult, CostModel, Detail, Location};

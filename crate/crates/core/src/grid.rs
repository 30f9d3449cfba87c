//! Uniform tensor grids on boxes in one or two dimensions, grid functions,
//! trapezoid quadrature and finite-difference operators.
//!
//! Node ordering is row-major with axis 0 varying fastest, so node `(i, j)` of a
//! 2D grid lives at flat index `i + n0 * j`.
//!
//! Difference stencils are fourth-order central in the interior (nodes with two
//! neighbours on each side), second-order central one node in from the boundary,
//! and second-order one-sided on the boundary itself. Polynomials of degree at
//! most two are differentiated exactly everywhere.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities below this value are clamped inside `log` so that `0 log 0` stays finite.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Tolerance on the quadrature integral of a [`Density`].
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Default mass allowed outside the support-margin box.
pub const MASS_DEFECT_TOL: f64 = 1e-10;

/// Half-widths of the support margin, in units of `sqrt(eps * t_max)`.
pub const SUPPORT_MARGIN_WIDTHS: f64 = 4.0;

/// One axis of a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.points {
            0.5 * h
        } else {
            h
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A uniform tensor grid with trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    weights: Vec<f64>,
}

/// Builds a `dim`-dimensional cube grid `[lo, hi]^dim` with `points_per_axis` nodes per axis.
pub fn build_grid(dim: usize, lo: f64, hi: f64, points_per_axis: usize) -> Result<Arc<Grid>> {
    Grid::new(dim, lo, hi, points_per_axis).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidBounds { lo, hi });
        }
        if points_per_axis < 4 {
            return Err(Error::TooFewPoints(points_per_axis));
        }
        let axis = Axis {
            lo,
            hi,
            points: points_per_axis,
        };
        Ok(Self::from_axes(vec![axis; dim]))
    }

    fn from_axes(axes: Vec<Axis>) -> Self {
        let len: usize = axes.iter().map(|a| a.points).product();
        let mut weights = vec![1.0; len];
        for (idx, w) in weights.iter_mut().enumerate() {
            let mut rem = idx;
            for axis in &axes {
                *w *= axis.weight(rem % axis.points);
                rem /= axis.points;
            }
        }
        Self { axes, weights }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Box volume, which the weights sum to.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Axis::length).product()
    }

    /// Distance in the flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[..axis].iter().map(|a| a.points).product()
    }

    /// Per-axis node indices of flat index `idx`.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let mut out = [0; 2];
        let mut rem = idx;
        for (k, axis) in self.axes.iter().enumerate() {
            out[k] = rem % axis.points;
            rem /= axis.points;
        }
        out
    }

    /// Coordinate of node `idx` along `axis`.
    pub fn coord(&self, idx: usize, axis: usize) -> f64 {
        self.axes[axis].coord(self.multi_index(idx)[axis])
    }

    /// Coordinates of node `idx`; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 2];
        for (k, axis) in self.axes.iter().enumerate() {
            p[k] = axis.coord(mi[k]);
        }
        p
    }

    /// Squared Euclidean norm of node `idx`.
    pub fn norm_sq(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        p[..self.dim()].iter().map(|x| x * x).sum()
    }

    /// Iterates over the flat start index of every grid line along `axis`.
    pub(crate) fn line_starts(&self, axis: usize) -> Vec<usize> {
        let stride = self.stride(axis);
        let n = self.axes[axis].points;
        (0..self.len())
            .filter(|idx| (idx / stride).is_multiple_of(n))
            .collect()
    }
}

/// Real values attached to every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node; `f` receives the node coordinates (length = dim).
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| f(&grid.point(idx)[..dim]))
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Node-wise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Self::new(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A probability density on a grid: non-negative with unit quadrature integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Density(ScalarField);

impl Density {
    /// Validates non-negativity and normalization (within [`NORMALIZATION_TOL`]).
    pub fn new(field: ScalarField) -> Result<Self> {
        check_nonnegative(field.values())?;
        let mass = integrate(&field)?;
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(mass));
        }
        Ok(Self(field))
    }

    /// Rescales a non-negative field to unit integral.
    pub fn normalize(field: ScalarField) -> Result<Self> {
        check_nonnegative(field.values())?;
        let mass = integrate(&field)?;
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let scaled = field.map(|v| v / mass)?;
        Ok(Self(scaled))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Node-wise `log`, clamped at [`DENSITY_FLOOR`].
    pub fn log_values(&self) -> Vec<f64> {
        self.values()
            .iter()
            .map(|&v| v.max(DENSITY_FLOOR).ln())
            .collect()
    }

    /// Mass lying outside the box shrunk by `4 sqrt(eps_tmax)` on every side.
    ///
    /// Returns the whole mass if the shrunk box is empty.
    pub fn mass_outside_margin(&self, eps_tmax: f64) -> f64 {
        let grid = self.grid();
        let pad = SUPPORT_MARGIN_WIDTHS * eps_tmax.max(0.0).sqrt();
        let inner_empty = grid.axes().iter().any(|a| a.lo + pad >= a.hi - pad);
        let dim = grid.dim();
        self.values()
            .iter()
            .zip(grid.weights())
            .enumerate()
            .filter(|(idx, _)| {
                inner_empty
                    || grid.point(*idx)[..dim]
                        .iter()
                        .zip(grid.axes())
                        .any(|(&x, a)| x < a.lo + pad || x > a.hi - pad)
            })
            .map(|(_, (v, w))| v * w)
            .sum()
    }

    /// Fails unless [`Self::mass_outside_margin`] is below `tol`.
    pub fn check_support_margin(&self, eps_tmax: f64, tol: f64) -> Result<()> {
        let mass_outside = self.mass_outside_margin(eps_tmax);
        if mass_outside > tol {
            return Err(Error::SupportMargin { mass_outside, tol });
        }
        Ok(())
    }
}

/// One scalar field per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("vector field needs components".into()))?;
        let grid = first.grid().clone();
        if components.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            same_grid(&grid, c.grid())?;
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.components[k]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.components[0].grid()
    }

    /// Node-wise Euclidean norm squared.
    pub fn norm_sq(&self) -> Vec<f64> {
        let n = self.grid().len();
        (0..n)
            .map(|i| self.components.iter().map(|c| c.values()[i].powi(2)).sum())
            .collect()
    }

    /// Largest node-wise distance to `other` over nodes where `mask` holds.
    pub fn max_diff_where(&self, other: &Self, mask: impl Fn(usize) -> bool) -> f64 {
        let mut worst = 0.0_f64;
        for (a, b) in self.components.iter().zip(&other.components) {
            for (i, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
                if mask(i) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    match values.iter().position(|&v| v < 0.0) {
        Some(index) => Err(Error::NegativeDensity {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Trapezoid-rule integral of raw node values.
pub fn integrate_values(grid: &Grid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    check_finite(values)?;
    let total: f64 = values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum();
    if !total.is_finite() {
        return Err(Error::NonFinite {
            index: values.len(),
            value: total,
        });
    }
    Ok(total)
}

/// Trapezoid-rule integral of a field.
pub fn integrate(field: &ScalarField) -> Result<f64> {
    integrate_values(field.grid(), field.values())
}

/// `H(rho | dx) = sum_i w_i rho_i log rho_i`, with `0 log 0 = 0`.
pub fn relative_entropy(density: &Density) -> f64 {
    entropy_of_values(density.grid(), density.values())
}

pub(crate) fn entropy_of_values(grid: &Grid, values: &[f64]) -> f64 {
    values
        .iter()
        .zip(grid.weights())
        .map(|(&r, &w)| w * r * r.max(DENSITY_FLOOR).ln())
        .sum()
}

/// `int |x|^2 d rho`.
pub fn second_moment(density: &Density) -> f64 {
    let grid = density.grid();
    density
        .values()
        .iter()
        .zip(grid.weights())
        .enumerate()
        .map(|(idx, (r, w))| w * r * grid.norm_sq(idx))
        .sum()
}

/// Derivative of order 1 or 2 along one axis, applied line by line.
pub(crate) fn axis_derivative(grid: &Grid, values: &[f64], axis: usize, order: u8) -> Vec<f64> {
    let n = grid.axis(axis).points;
    let h = grid.spacing(axis);
    let stride = grid.stride(axis);
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; n];
    let mut dline = vec![0.0; n];
    for start in grid.line_starts(axis) {
        for (i, v) in line.iter_mut().enumerate() {
            *v = values[start + i * stride];
        }
        match order {
            1 => first_derivative_line(&line, h, &mut dline),
            2 => second_derivative_line(&line, h, &mut dline),
            _ => unreachable!("only first and second derivatives are supported"),
        }
        for (i, d) in dline.iter().enumerate() {
            out[start + i * stride] = *d;
        }
    }
    out
}

fn first_derivative_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    for i in 0..n {
        out[i] = if i == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
        } else if i == 1 || i == n - 2 {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        } else {
            (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
        };
    }
}

fn second_derivative_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let h2 = h * h;
    for i in 0..n {
        out[i] = if i == 0 {
            (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        } else if i == n - 1 {
            (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2
        } else if i == 1 || i == n - 2 {
            (f[i - 1] - 2.0 * f[i] + f[i + 1]) / h2
        } else {
            (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h2)
        };
    }
}

pub(crate) fn gradient_values(grid: &Grid, values: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|k| axis_derivative(grid, values, k, 1))
        .collect()
}

pub(crate) fn laplacian_values(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for k in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(axis_derivative(grid, values, k, 2)) {
            *o += d;
        }
    }
    out
}

/// Node-wise squared Frobenius norm of the Hessian.
pub(crate) fn hessian_frobenius_sq_values(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for k in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(axis_derivative(grid, values, k, 2)) {
            *o += d * d;
        }
    }
    if grid.dim() == 2 {
        let dx = axis_derivative(grid, values, 0, 1);
        let dxy = axis_derivative(grid, &dx, 1, 1);
        for (o, d) in out.iter_mut().zip(dxy) {
            *o += 2.0 * d * d;
        }
    }
    out
}

pub fn gradient(field: &ScalarField) -> VectorField {
    let grid = field.grid();
    let components = gradient_values(grid, field.values())
        .into_iter()
        .map(|values| ScalarField {
            grid: grid.clone(),
            values,
        })
        .collect();
    VectorField { components }
}

pub fn laplacian(field: &ScalarField) -> ScalarField {
    ScalarField {
        grid: field.grid().clone(),
        values: laplacian_values(field.grid(), field.values()),
    }
}

/// `|Hess f|^2`; for the generator `Delta / 2` this is `4 Gamma_2(f)`.
pub fn hessian_frobenius_sq(field: &ScalarField) -> ScalarField {
    ScalarField {
        grid: field.grid().clone(),
        values: hessian_frobenius_sq_values(field.grid(), field.values()),
    }
}

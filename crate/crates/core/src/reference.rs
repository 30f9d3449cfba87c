//! Closed-form Gaussian quantities and the marginal specifications built from them.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Density, Grid, ScalarField, MASS_DEFECT_TOL};

/// Time horizon `eps * t_max` used for the support-margin check of generated marginals.
pub const REFERENCE_EPS_TMAX: f64 = 1.0;

/// Product Gaussian. A single mean or sigma is broadcast over all axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let spec = Self { mean, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic_1d(mean: f64, sigma: f64) -> Self {
        Self {
            mean: vec![mean],
            sigma: vec![sigma],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() || self.sigma.is_empty() {
            return Err(Error::InvalidArgument("gaussian mean and sigma must be non-empty".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("gaussian mean must be finite".into()));
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("gaussian sigma must be positive and finite".into()));
        }
        Ok(())
    }

    fn dim(&self) -> usize {
        self.mean.len().max(self.sigma.len())
    }

    fn per_axis(&self, dim: usize) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let pick = |v: &[f64], k: usize| -> Result<f64> {
            match v.len() {
                1 => Ok(v[0]),
                n if n == dim => Ok(v[k]),
                n => Err(Error::WrongDimension { expected: dim, got: n }),
            }
        };
        (0..dim).map(|k| Ok((pick(&self.mean, k)?, pick(&self.sigma, k)?))).collect()
    }

    fn value_at(axes: &[(f64, f64)], x: &[f64]) -> f64 {
        axes.iter()
            .zip(x)
            .map(|(&(m, s), &xi)| (-(xi - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt()))
            .product()
    }
}

/// Finite mixture of product Gaussians; weights are normalized to sum 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<GaussianSpec>,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.components.len() != self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "mixture needs one weight per component, got {} components and {} weights",
                self.components.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("mixture weights must be nonnegative with positive sum".into()));
        }
        self.components.iter().try_for_each(GaussianSpec::validate)
    }
}

/// Closed-form marginal description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MarginalSpec {
    Gaussian(GaussianSpec),
    Mixture(MixtureSpec),
}

/// Gaussian node values, renormalized on the grid, with the support margin enforced.
pub fn gaussian_density(grid: &Arc<Grid>, spec: &GaussianSpec) -> Result<Density> {
    let axes = spec.per_axis(grid.dim())?;
    let field = ScalarField::from_fn(grid.clone(), |x| GaussianSpec::value_at(&axes, x))?;
    finish(field)
}

pub fn mixture_density(grid: &Arc<Grid>, spec: &MixtureSpec) -> Result<Density> {
    spec.validate()?;
    let total: f64 = spec.weights.iter().sum();
    let parts = spec
        .components
        .iter()
        .map(|c| c.per_axis(grid.dim()))
        .collect::<Result<Vec<_>>>()?;
    let field = ScalarField::from_fn(grid.clone(), |x| {
        parts
            .iter()
            .zip(&spec.weights)
            .map(|(axes, w)| w / total * GaussianSpec::value_at(axes, x))
            .sum()
    })?;
    finish(field)
}

pub fn marginal_density(grid: &Arc<Grid>, spec: &MarginalSpec) -> Result<Density> {
    match spec {
        MarginalSpec::Gaussian(g) => gaussian_density(grid, g),
        MarginalSpec::Mixture(m) => mixture_density(grid, m),
    }
}

fn finish(field: ScalarField) -> Result<Density> {
    let density = Density::normalize(field)?;
    density.check_support_margin(REFERENCE_EPS_TMAX, MASS_DEFECT_TOL)?;
    Ok(density)
}

/// `H(N(m, diag sigma^2) | dx) = -sum_k 1/2 log(2 pi e sigma_k^2)`.
pub fn gaussian_entropy(spec: &GaussianSpec) -> f64 {
    let dim = spec.dim();
    let sigma = |k: usize| if spec.sigma.len() == 1 { spec.sigma[0] } else { spec.sigma[k] };
    (0..dim).map(|k| -0.5 * (2.0 * PI * E * sigma(k).powi(2)).ln()).sum()
}

/// `W2^2` between product Gaussians: `sum_k (m0 - m1)^2 + (s0 - s1)^2`.
pub fn gaussian_w2_squared(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    let dim = a.dim().max(b.dim());
    let (pa, pb) = (a.per_axis(dim)?, b.per_axis(dim)?);
    Ok(pa
        .iter()
        .zip(&pb)
        .map(|(&(m0, s0), &(m1, s1))| (m0 - m1).powi(2) + (s0 - s1).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, integrate, relative_entropy};

    #[test]
    fn gaussian_density_is_normalized() {
        let g = build_grid(1, -14.0, 14.0, 561).unwrap();
        let d = gaussian_density(&g, &GaussianSpec::isotropic_1d(0.0, 1.0)).unwrap();
        assert!((integrate(d.field()).unwrap() - 1.0).abs() <= 1e-12);
        assert!((d.values()[280] - 0.398_942_280_401_432_7).abs() <= 1e-10);
    }

    #[test]
    fn margin_violation_is_rejected() {
        let g = build_grid(1, -1.0, 1.0, 101).unwrap();
        let err = gaussian_density(&g, &GaussianSpec::isotropic_1d(0.0, 0.3)).unwrap_err();
        assert!(matches!(err, Error::SupportMargin { .. }));
    }

    #[test]
    fn entropy_closed_forms() {
        assert!((gaussian_entropy(&GaussianSpec::isotropic_1d(0.0, 1.0)) + 1.418_938_533_204_672_7).abs() < 1e-12);
        let two = GaussianSpec::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!((gaussian_entropy(&two) + 2.837_877_066_409_345_5).abs() < 1e-12);
        let unit = GaussianSpec::isotropic_1d(3.0, (2.0 * PI * E).powf(-0.5));
        assert!(gaussian_entropy(&unit).abs() < 1e-14);
    }

    #[test]
    fn entropy_matches_quadrature() {
        let g = build_grid(1, -14.0, 14.0, 561).unwrap();
        for (m, s) in [(0.0, 1.0), (-2.0, 0.7), (1.0, 1.3)] {
            let spec = GaussianSpec::isotropic_1d(m, s);
            let d = gaussian_density(&g, &spec).unwrap();
            assert!((relative_entropy(&d) - gaussian_entropy(&spec)).abs() <= 1e-6);
        }
    }

    #[test]
    fn w2_closed_forms() {
        let a = GaussianSpec::isotropic_1d(-2.0, 1.0);
        let b = GaussianSpec::isotropic_1d(2.0, 1.0);
        assert_eq!(gaussian_w2_squared(&a, &a).unwrap(), 0.0);
        assert_eq!(gaussian_w2_squared(&a, &b).unwrap(), 16.0);
        let c = GaussianSpec::isotropic_1d(0.0, 1.0);
        let d = GaussianSpec::isotropic_1d(0.0, 2.0);
        assert_eq!(gaussian_w2_squared(&c, &d).unwrap(), 1.0);
    }

    #[test]
    fn two_dimensional_and_mixture() {
        let g = build_grid(2, -12.0, 12.0, 97).unwrap();
        let d = gaussian_density(&g, &GaussianSpec::new(vec![0.5], vec![1.0]).unwrap()).unwrap();
        assert!((integrate(d.field()).unwrap() - 1.0).abs() <= 1e-12);
        let g1 = build_grid(1, -14.0, 14.0, 561).unwrap();
        let mix = MixtureSpec {
            components: vec![GaussianSpec::isotropic_1d(-1.5, 0.5), GaussianSpec::isotropic_1d(1.5, 0.5)],
            weights: vec![1.0, 1.0],
        };
        let m = mixture_density(&g1, &mix).unwrap();
        assert!((m.values()[250] - m.values()[310]).abs() < 1e-15);
        let bad = MixtureSpec {
            components: mix.components.clone(),
            weights: vec![1.0],
        };
        assert!(mixture_density(&g1, &bad).is_err());
        let wrong = GaussianSpec::new(vec![0.0, 0.0, 0.0], vec![1.0]).unwrap();
        assert!(matches!(gaussian_density(&g1, &wrong), Err(Error::WrongDimension { .. })));
    }

    #[test]
    fn spec_serde_round_trip() {
        let json = r#"{"type":"gaussian","mean":[-2.0],"sigma":[1.0]}"#;
        let spec: MarginalSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, MarginalSpec::Gaussian(GaussianSpec::isotropic_1d(-2.0, 1.0)));
        assert!(serde_json::from_str::<MarginalSpec>(r#"{"type":"gaussian","mean":[0],"sigma":[1],"x":1}"#).is_err());
    }
}

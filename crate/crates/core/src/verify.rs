//! Numerical verdicts for the convexity, regularity, EVI, contraction and
//! small-noise results. Every check reduces to a list of signed margins; a check
//! passes when its worst margin is at least `-slack`.
//!
//! Heat flows acting on marginals use the standard semigroup of `Delta / 2`;
//! entropic costs use the configured `eps`.

use serde::{Deserialize, Serialize};

use crate::cost::{entropic_cost_primal, wasserstein2_squared_1d};
use crate::error::{Error, Result};
use crate::grid::{relative_entropy, Density};
use crate::heat::heat_apply;
use crate::interpolation::{interpolate, sample_path, InterpolationSample};
use crate::schrodinger::{solve_with, BridgeSolution, SolverOptions};

pub const CONCAVITY: &str = "concavity";
pub const COSTA: &str = "costa";
pub const REGULARITY: &str = "regularity";
pub const EVI: &str = "evi";
pub const INTEGRAL_EVI: &str = "integral_evi";
pub const CONTRACTION: &str = "contraction";
pub const EPSILON_LIMIT: &str = "epsilon_limit";
pub const EVI_W2: &str = "evi_w2";

pub const CHECK_NAMES: [&str; 8] = [
    CONCAVITY,
    COSTA,
    REGULARITY,
    EVI,
    INTEGRAL_EVI,
    CONTRACTION,
    EPSILON_LIMIT,
    EVI_W2,
];

/// Step used for time derivatives of cost maps.
pub const COST_DT: f64 = 1e-3;

pub fn default_slack(name: &str) -> Option<f64> {
    Some(match name {
        CONCAVITY | COSTA => 1e-6,
        REGULARITY => 1e-3,
        EVI | INTEGRAL_EVI | CONTRACTION => 1e-4,
        EPSILON_LIMIT => 0.05,
        EVI_W2 => 1e-3,
        _ => return None,
    })
}

/// Where a margin was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    S(f64),
    T(f64),
    Eps(f64),
}

/// A named value sampled while running a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub label: String,
    pub at: Location,
    pub value: f64,
}

impl Detail {
    fn new(label: &str, at: Location, value: f64) -> Self {
        Self {
            label: label.to_string(),
            at,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub location: Location,
    pub slack: f64,
    pub details: Vec<Detail>,
}

impl CheckResult {
    /// Builds the verdict from `(location, margin)` pairs; NaN margins fail.
    fn from_margins(name: &str, slack: f64, margins: &[(Location, f64)], details: Vec<Detail>) -> Result<Self> {
        let (location, worst) = margins
            .iter()
            .map(|&(l, m)| (l, if m.is_nan() { -f64::MAX } else { m }))
            .fold(None, |acc: Option<(Location, f64)>, (l, m)| match acc {
                Some((_, w)) if w <= m => acc,
                _ => Some((l, m)),
            })
            .ok_or_else(|| Error::InvalidArgument(format!("check {name} produced no margins")))?;
        Ok(Self {
            name: name.to_string(),
            passed: worst >= -slack,
            worst_margin: worst,
            location,
            slack,
            details,
        })
    }

    pub fn detail(&self, label: &str) -> impl Iterator<Item = &Detail> {
        let label = label.to_string();
        self.details.iter().filter(move |d| d.label == label)
    }
}

/// Entropic cost parameters shared by the cost-based checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub eps: f64,
    pub solver: SolverOptions,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            eps: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

impl CostModel {
    fn solve(&self, u: &Density, v: &Density, warm: Option<&BridgeSolution>) -> Result<BridgeSolution> {
        let sol = solve_with(u, v, self.eps, &self.solver, warm.map(|w| w.log_g().values()))?;
        sol.ensure_converged()?;
        Ok(sol)
    }

    fn cost(&self, u: &Density, v: &Density, warm: Option<&BridgeSolution>) -> Result<f64> {
        entropic_cost_primal(&self.solve(u, v, warm)?)
    }
}

/// `T_t v` for the standard heat semigroup, renormalized against truncation round-off.
pub fn heat_flow(v: &Density, t: f64) -> Result<Density> {
    Density::normalize(heat_apply(v.field(), t, 1.0)?)
}

fn undivided_second_differences(values: &[f64]) -> Vec<f64> {
    values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

fn ensure_dim(mu: &Density, n: usize) -> Result<()> {
    if mu.grid().dim() != n {
        return Err(Error::WrongDimension {
            expected: n,
            got: mu.grid().dim(),
        });
    }
    Ok(())
}

/// Concavity of `s -> exp(-h(s)/n)` along the interpolation, both through second
/// differences on the uniform s-grid and through `h'' - h'^2/n >= 0`.
pub fn check_concavity(solution: &BridgeSolution, n: usize, s_count: usize, slack: f64) -> Result<CheckResult> {
    solution.ensure_converged()?;
    let path = sample_path(solution, s_count)?;
    concavity_from_path(&path, n, slack)
}

pub fn concavity_from_path(path: &[InterpolationSample], n: usize, slack: f64) -> Result<CheckResult> {
    let nf = n as f64;
    let psi: Vec<f64> = path.iter().map(|p| (-p.h / nf).exp()).collect();
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for (k, d2) in undivided_second_differences(&psi).into_iter().enumerate() {
        let at = Location::S(path[k + 1].s);
        margins.push((at, -d2));
        details.push(Detail::new("psi_second_difference", at, d2));
    }
    for p in path {
        let at = Location::S(p.s);
        let key = p.h_second - p.h_prime * p.h_prime / nf;
        margins.push((at, key * psi_of(p, nf) / nf));
        margins.push((at, key));
        details.push(Detail::new("h_second_minus_h_prime_sq_over_n", at, key));
        details.push(Detail::new("psi", at, psi_of(p, nf)));
    }
    CheckResult::from_margins(CONCAVITY, slack, &margins, details)
}

fn psi_of(p: &InterpolationSample, n: f64) -> f64 {
    (-p.h / n).exp()
}

/// Concavity in `t` of `exp(-2 H(T_t mu) / n)`.
pub fn check_costa_heat_flow(mu: &Density, n: usize, t_grid: &[f64], slack: f64) -> Result<CheckResult> {
    ensure_dim(mu, n)?;
    if t_grid.len() < 3 {
        return Err(Error::InvalidArgument("costa check needs at least 3 times".into()));
    }
    let power: Vec<f64> = t_grid
        .iter()
        .map(|&t| Ok((-2.0 * relative_entropy(&heat_flow(mu, t)?) / n as f64).exp()))
        .collect::<Result<_>>()?;
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for (k, &t) in t_grid.iter().enumerate() {
        details.push(Detail::new("entropy_power", Location::T(t), power[k]));
    }
    for (k, d2) in undivided_second_differences(&power).into_iter().enumerate() {
        let at = Location::T(t_grid[k + 1]);
        margins.push((at, -d2));
        details.push(Detail::new("second_difference", at, d2));
    }
    CheckResult::from_margins(COSTA, slack, &margins, details)
}

/// Value at 0 of the polynomial through `(x_k, y_k)` (Neville).
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let m = xs.len();
    for level in 1..m {
        for i in 0..m - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// `d/dt|0 A(u, T_t v) = -h'(1)/2`: forward difference quotients over `dt_list`,
/// extrapolated to `dt -> 0`, against the entropy derivative at the end of the bridge.
pub fn check_regularity_identity(
    mu0: &Density,
    mu1: &Density,
    model: &CostModel,
    dt_list: &[f64],
    slack: f64,
) -> Result<CheckResult> {
    if dt_list.is_empty() || dt_list.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("dt_list must hold positive steps".into()));
    }
    let base = model.solve(mu0, mu1, None)?;
    let a0 = entropic_cost_primal(&base)?;
    let rhs = -0.5 * interpolate(&base, 1.0)?.h_prime;
    let mut details = vec![Detail::new("rhs_minus_half_h_prime_at_1", Location::T(0.0), rhs)];
    let mut quotients = Vec::new();
    for &dt in dt_list {
        let q = (model.cost(mu0, &heat_flow(mu1, dt)?, Some(&base))? - a0) / dt;
        details.push(Detail::new("difference_quotient", Location::T(dt), q));
        quotients.push(q);
    }
    let lhs = extrapolate_to_zero(dt_list, &quotients);
    details.push(Detail::new("extrapolated_derivative", Location::T(0.0), lhs));
    CheckResult::from_margins(REGULARITY, slack, &[(Location::T(0.0), -(lhs - rhs).abs())], details)
}

/// `(n/2)(1 - exp(-(H(u) - H(v))/n))`
fn evi_bound(h_u: f64, h_v: f64, n: f64) -> f64 {
    0.5 * n * (1.0 - (-(h_u - h_v) / n).exp())
}

/// `dA(u, T_t v)/dt <= (n/2)(1 - exp(-(H(u) - H(T_t v))/n))` at each `t`.
pub fn check_evi(
    mu0: &Density,
    mu1: &Density,
    n: usize,
    model: &CostModel,
    t_grid: &[f64],
    slack: f64,
) -> Result<CheckResult> {
    ensure_dim(mu0, n)?;
    let base = model.solve(mu0, mu1, None)?;
    let h_u = relative_entropy(mu0);
    let cost_at = |t: f64| model.cost(mu0, &heat_flow(mu1, t)?, Some(&base));
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
        let dt = COST_DT;
        let lhs = if t < dt {
            (-3.0 * cost_at(t)? + 4.0 * cost_at(t + dt)? - cost_at(t + 2.0 * dt)?) / (2.0 * dt)
        } else {
            (cost_at(t + dt)? - cost_at(t - dt)?) / (2.0 * dt)
        };
        let rhs = evi_bound(h_u, relative_entropy(&heat_flow(mu1, t)?), n as f64);
        let at = Location::T(t);
        margins.push((at, rhs - lhs));
        details.push(Detail::new("cost_derivative", at, lhs));
        details.push(Detail::new("entropy_bound", at, rhs));
    }
    CheckResult::from_margins(EVI, slack, &margins, details)
}

/// `A(u, T_t v) - A(u, v) <= (n/2) t (1 - exp(-(H(u) - H(T_t v))/n))` at each `t`.
pub fn check_integral_evi(
    mu0: &Density,
    mu1: &Density,
    n: usize,
    model: &CostModel,
    t_list: &[f64],
    slack: f64,
) -> Result<CheckResult> {
    ensure_dim(mu0, n)?;
    let base = model.solve(mu0, mu1, None)?;
    let a0 = entropic_cost_primal(&base)?;
    let h_u = relative_entropy(mu0);
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for &t in t_list {
        if t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
        let flowed = heat_flow(mu1, t)?;
        let lhs = if t == 0.0 { 0.0 } else { model.cost(mu0, &flowed, Some(&base))? - a0 };
        let rhs = t * evi_bound(h_u, relative_entropy(&flowed), n as f64);
        let at = Location::T(t);
        margins.push((at, rhs - lhs));
        details.push(Detail::new("cost_increment", at, lhs));
        details.push(Detail::new("entropy_bound", at, rhs));
    }
    CheckResult::from_margins(INTEGRAL_EVI, slack, &margins, details)
}

/// `A(T_tau u, T_tau v) <= A(u, v) - n int_0^tau sinh^2((H(T_t u) - H(T_t v))/(2n)) dt`.
///
/// The verdict uses the factor `n`; the margin with factor `2n` in front of the
/// integral is reported as the detail `margin_factor_2n`.
pub fn check_contraction(
    mu0: &Density,
    mu1: &Density,
    n: usize,
    model: &CostModel,
    tau: f64,
    t_count: usize,
    slack: f64,
) -> Result<CheckResult> {
    ensure_dim(mu0, n)?;
    if !(tau > 0.0) || t_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "contraction needs tau > 0 and at least 2 quadrature points, got tau = {tau}, t_count = {t_count}"
        )));
    }
    let nf = n as f64;
    let base = model.solve(mu0, mu1, None)?;
    let a_start = entropic_cost_primal(&base)?;
    let a_end = model.cost(&heat_flow(mu0, tau)?, &heat_flow(mu1, tau)?, Some(&base))?;
    let dt = tau / (t_count - 1) as f64;
    let mut details = Vec::new();
    let mut integral = 0.0;
    for k in 0..t_count {
        let t = k as f64 * dt;
        let gap = relative_entropy(&heat_flow(mu0, t)?) - relative_entropy(&heat_flow(mu1, t)?);
        let integrand = (gap / (2.0 * nf)).sinh().powi(2);
        let w = if k == 0 || k == t_count - 1 { 0.5 } else { 1.0 };
        integral += w * dt * integrand;
        details.push(Detail::new("sinh2_integrand", Location::T(t), integrand));
    }
    let margin_n = a_start - nf * integral - a_end;
    let margin_2n = a_start - 2.0 * nf * integral - a_end;
    let at = Location::T(tau);
    details.push(Detail::new("cost_start", Location::T(0.0), a_start));
    details.push(Detail::new("cost_end", at, a_end));
    details.push(Detail::new("sinh2_integral", at, integral));
    details.push(Detail::new("margin_factor_n", at, margin_n));
    details.push(Detail::new("margin_factor_2n", at, margin_2n));
    CheckResult::from_margins(CONTRACTION, slack, &[(at, margin_n)], details)
}

/// `A^eps -> W2^2/2` along a decreasing `eps_list`.
///
/// Margins: `-rel_err` at the last eps (relative to `W2^2/2`, absolute when that is 0),
/// and for each consecutive pair `(err_k - err_{k+1})/err_k - slack`, which is at least
/// `-slack` exactly when the error does not grow.
pub fn check_epsilon_limit(
    mu0: &Density,
    mu1: &Density,
    eps_list: &[f64],
    solver: &SolverOptions,
    slack: f64,
) -> Result<CheckResult> {
    ensure_dim(mu0, 1)?;
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("eps_list is empty".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("eps_list must be strictly decreasing".into()));
    }
    let target = 0.5 * wasserstein2_squared_1d(mu0, mu1)?;
    let scale = if target.abs() > 1e-12 { target.abs() } else { 1.0 };
    let mut details = vec![Detail::new("half_w2_squared", Location::Eps(0.0), target)];
    let mut errors = Vec::new();
    for &eps in eps_list {
        let model = CostModel { eps, solver: *solver };
        let cost = model.cost(mu0, mu1, None)?;
        details.push(Detail::new("cost", Location::Eps(eps), cost));
        errors.push((cost - target).abs());
    }
    let mut margins = Vec::new();
    for (k, w) in errors.windows(2).enumerate() {
        let decrease = if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 };
        margins.push((Location::Eps(eps_list[k + 1]), decrease - slack));
    }
    let last = *eps_list.last().unwrap_or(&0.0);
    let rel = errors[errors.len() - 1] / scale;
    margins.push((Location::Eps(last), -rel));
    details.push(Detail::new("final_relative_error", Location::Eps(last), rel));
    CheckResult::from_margins(EPSILON_LIMIT, slack, &margins, details)
}

/// `d+/dt W2^2(u, T_t v) <= n (1 - exp(-(H(u) - H(T_t v))/n))` in one dimension.
///
/// With `eps_small`, the matching eps-EVI slopes `2 dA^eps/dt` are recorded as details.
pub fn check_evi_w2(
    mu0: &Density,
    mu1: &Density,
    t_grid: &[f64],
    eps_small: Option<f64>,
    solver: &SolverOptions,
    slack: f64,
) -> Result<CheckResult> {
    ensure_dim(mu0, 1)?;
    let h_u = relative_entropy(mu0);
    let dt = COST_DT;
    let w2_at = |t: f64| wasserstein2_squared_1d(mu0, &heat_flow(mu1, t)?);
    let small = eps_small.map(|eps| CostModel { eps, solver: *solver });
    let base = match &small {
        Some(m) => Some(m.solve(mu0, mu1, None)?),
        None => None,
    };
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
        let slope = (-3.0 * w2_at(t)? + 4.0 * w2_at(t + dt)? - w2_at(t + 2.0 * dt)?) / (2.0 * dt);
        let rhs = 2.0 * evi_bound(h_u, relative_entropy(&heat_flow(mu1, t)?), 1.0);
        let at = Location::T(t);
        margins.push((at, rhs - slope));
        details.push(Detail::new("w2_slope", at, slope));
        details.push(Detail::new("entropy_bound", at, rhs));
        if let Some(m) = &small {
            let cost_at = |s: f64| m.cost(mu0, &heat_flow(mu1, s)?, base.as_ref());
            let eps_slope = (-3.0 * cost_at(t)? + 4.0 * cost_at(t + dt)? - cost_at(t + 2.0 * dt)?) / (2.0 * dt);
            details.push(Detail::new("eps_evi_margin", at, rhs - 2.0 * eps_slope));
        }
    }
    CheckResult::from_margins(EVI_W2, slack, &margins, details)
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Fixture unless stated otherwise: grid [-14, 14] with 561 points, mu0 = N(-2, 1),
//! mu1 = N(2, 1), eps = 1, solver tolerance 1e-9.

use std::fs;
use std::sync::Arc;
use std::time::Instant;

use entropic_cli::{cmd_verify, RunArgs};
use entropic_core::verify::{
    check_contraction, check_costa_heat_flow, check_epsilon_limit, check_evi, check_evi_w2, check_integral_evi,
    check_regularity_identity,
};
use entropic_core::{
    benamou_brenier_value, build_grid, entropic_cost_dual, entropic_cost_primal, gaussian_density,
    gaussian_w2_squared, hjb_residuals, interpolate, mixture_density, sample_path, solve_with, transport_residual,
    wasserstein2_squared_1d, BridgeSolution, CostModel, Density, GaussianSpec, Grid, MixtureSpec, SolverOptions,
};

const TOL: f64 = 1e-9;

fn grid(points: usize) -> Arc<Grid> {
    build_grid(1, -14.0, 14.0, points).expect("grid")
}

fn normal(g: &Arc<Grid>, m: f64, s: f64) -> Density {
    gaussian_density(g, &GaussianSpec::isotropic_1d(m, s)).expect("gaussian")
}

fn options() -> SolverOptions {
    SolverOptions {
        max_iter: 10_000,
        tol: TOL,
    }
}

fn solve(mu0: &Density, mu1: &Density) -> BridgeSolution {
    let sol = solve_with(mu0, mu1, 1.0, &options(), None).expect("solve");
    sol.ensure_converged().expect("converged");
    sol
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

struct Suite {
    failures: Vec<usize>,
}

impl Suite {
    fn record(&mut self, id: usize, title: &str, passed: bool, summary: String) {
        println!("criterion {id:>2} {} {title}: {summary}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failures.push(id);
        }
    }

    fn run(&mut self, id: usize, title: &str, body: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (passed, summary) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(body)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        self.record(id, title, passed, format!("{summary} [{:.1}s]", start.elapsed().as_secs_f64()));
    }
}

fn main() {
    let g = grid(561);
    let mu0 = normal(&g, -2.0, 1.0);
    let mu1 = normal(&g, 2.0, 1.0);
    let model = CostModel {
        eps: 1.0,
        solver: options(),
    };
    let mut suite = Suite { failures: Vec::new() };
    let t0 = Instant::now();

    let start = Instant::now();
    let sol = solve_with(&mu0, &mu1, 1.0, &options(), None).expect("solve");
    let solve_time = start.elapsed().as_secs_f64();
    suite.record(
        1,
        "solver convergence",
        sol.converged() && sol.residual0() <= TOL && sol.residual1() <= TOL && solve_time <= 10.0,
        format!(
            "converged={} residuals=({:.2e}, {:.2e}) <= 1e-9, iterations={}, runtime {:.3}s <= 10s",
            sol.converged(),
            sol.residual0(),
            sol.residual1(),
            sol.iterations(),
            solve_time
        ),
    );

    suite.run(2, "primal, dual and dynamic cost agree", || {
        let primal = entropic_cost_primal(&sol).unwrap();
        let dual = entropic_cost_dual(&sol).unwrap();
        let bb = benamou_brenier_value(&sol, 65).unwrap();
        let gap = (primal - dual).abs();
        let rel = (primal - bb).abs() / primal.abs();
        (
            gap <= 1e-6 && rel <= 0.02,
            format!("primal={primal:.12} dual={dual:.12} |gap|={gap:.2e} <= 1e-6, bb={bb:.8} rel={rel:.2e} <= 2e-2"),
        )
    });

    suite.run(3, "cost symmetry", || {
        let forward = entropic_cost_primal(&sol).unwrap();
        let backward = entropic_cost_primal(&solve(&mu1, &mu0)).unwrap();
        let d = (forward - backward).abs();
        (d <= 1e-10, format!("|A(mu0,mu1) - A(mu1,mu0)| = {d:.2e} <= 1e-10"))
    });

    let path = sample_path(&sol, 65).expect("path");

    suite.run(4, "entropy derivatives vs finite differences", || {
        let h = |s: f64| interpolate(&sol, s).unwrap().h;
        let d = 1e-3;
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        for p in &path {
            let s = p.s;
            let (fd1, fd2) = if s < 2.0 * d {
                let v = [h(s), h(s + d), h(s + 2.0 * d), h(s + 3.0 * d)];
                ((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * d), (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (d * d))
            } else if s > 1.0 - 2.0 * d {
                let v = [h(s), h(s - d), h(s - 2.0 * d), h(s - 3.0 * d)];
                ((3.0 * v[0] - 4.0 * v[1] + v[2]) / (2.0 * d), (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (d * d))
            } else {
                let (hm, h0, hp) = (h(s - d), p.h, h(s + d));
                ((hp - hm) / (2.0 * d), (hp - 2.0 * h0 + hm) / (d * d))
            };
            e1 = e1.max((p.h_prime - fd1).abs());
            e2 = e2.max((p.h_second - fd2).abs());
        }
        (
            e1 <= 1e-4 && e2 <= 1e-3,
            format!("max |h' - FD| = {e1:.2e} <= 1e-4, max |h'' - FD2| = {e2:.2e} <= 1e-3 over 65 samples"),
        )
    });

    suite.run(5, "convexity of h and h'' >= h'^2/n", || {
        let second = path.windows(3).map(|w| w[0].h - 2.0 * w[1].h + w[2].h).fold(f64::INFINITY, f64::min);
        let key = path
            .iter()
            .map(|p| p.h_second - p.h_prime * p.h_prime)
            .fold(f64::INFINITY, f64::min);
        (
            second >= -1e-6 && key >= -1e-6,
            format!("min second difference of h = {second:.3e} >= -1e-6, min (h'' - h'^2/n) = {key:.3e} >= -1e-6"),
        )
    });

    suite.run(6, "concavity of exp(-h/n) along the interpolation", || {
        let psi: Vec<f64> = path.iter().map(|p| (-p.h).exp()).collect();
        let worst = psi.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::NEG_INFINITY, f64::max);
        (worst <= 1e-6, format!("max second difference = {worst:.3e} <= 1e-6"))
    });

    suite.run(7, "entropy power concavity along the heat flow", || {
        let times = linspace(0.0, 2.0, 41);
        let gauss = normal(&g, 0.0, 1.0);
        let mix = mixture_density(
            &g,
            &MixtureSpec {
                components: vec![GaussianSpec::isotropic_1d(-1.5, 0.7), GaussianSpec::isotropic_1d(1.5, 1.0)],
                weights: vec![0.4, 0.6],
            },
        )
        .unwrap();
        let a = check_costa_heat_flow(&gauss, 1, &times, 1e-6).unwrap();
        let b = check_costa_heat_flow(&mix, 1, &times, 1e-6).unwrap();
        (
            a.passed && b.passed,
            format!(
                "max second difference: N(0,1) {:.3e}, mixture {:.3e} <= 1e-6",
                -a.worst_margin, -b.worst_margin
            ),
        )
    });

    suite.run(8, "regularity identity at t = 0", || {
        let r = check_regularity_identity(&mu0, &mu1, &model, &[1e-2, 5e-3, 2.5e-3], 1e-3).unwrap();
        let lhs = r.detail("extrapolated_derivative").next().map(|d| d.value).unwrap_or(f64::NAN);
        let rhs = r.detail("rhs_minus_half_h_prime_at_1").next().map(|d| d.value).unwrap_or(f64::NAN);
        (
            r.passed,
            format!("extrapolated dA/dt = {lhs:.10}, -h'(1)/2 = {rhs:.10}, |diff| = {:.2e} <= 1e-3", -r.worst_margin),
        )
    });

    suite.run(9, "EVI and integral EVI", || {
        let times = linspace(0.0, 0.5, 11);
        let evi = check_evi(&mu0, &mu1, 1, &model, &times, 1e-4).unwrap();
        let integral = check_integral_evi(&mu0, &mu1, 1, &model, &times[1..], 1e-4).unwrap();
        (
            evi.passed && integral.passed,
            format!(
                "min EVI margin {:.3e}, min integral EVI margin {:.3e} >= -1e-4 on t in [0, 0.5]",
                evi.worst_margin, integral.worst_margin
            ),
        )
    });

    suite.run(10, "contraction along the heat flow", || {
        let r = check_contraction(&mu0, &mu1, 1, &model, 0.3, 31, 1e-4).unwrap();
        let m2n = r.detail("margin_factor_2n").next().map(|d| d.value).unwrap_or(f64::NAN);
        (
            r.passed,
            format!("margin (factor n) = {:.6e} >= -1e-4, margin (factor 2n) = {m2n:.6e}", r.worst_margin),
        )
    });

    suite.run(11, "small-noise limit", || {
        let g601 = grid(601);
        let (u, v) = (normal(&g601, -2.0, 1.0), normal(&g601, 2.0, 1.0));
        let eps_list = [1.0, 0.5, 0.25, 0.1, 0.05];
        let r = check_epsilon_limit(&u, &v, &eps_list, &options(), 0.05).unwrap();
        let costs: Vec<f64> = r.detail("cost").map(|d| d.value).collect();
        let target = 8.0;
        let errs: Vec<f64> = costs.iter().map(|c| (c - target).abs()).collect();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]) && errs.len() == eps_list.len();
        let final_rel = errs.last().copied().unwrap_or(f64::NAN) / target;
        let w2 = wasserstein2_squared_1d(&u, &v).unwrap();
        let closed = gaussian_w2_squared(&GaussianSpec::isotropic_1d(-2.0, 1.0), &GaussianSpec::isotropic_1d(2.0, 1.0))
            .unwrap();
        let w2_err = (w2 - closed).abs();
        (
            r.passed && decreasing && final_rel <= 0.05 && w2_err <= 1e-3,
            format!(
                "|A^eps - 8| = {} strictly decreasing, final rel err {final_rel:.2e} <= 5e-2, \
                 W2^2 quantile {w2:.10} vs closed form {closed} (|diff| {w2_err:.1e} <= 1e-3)",
                errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" > ")
            ),
        )
    });

    suite.run(12, "EVI in W2", || {
        let r = check_evi_w2(&mu0, &mu1, &[0.0, 0.1, 0.2], None, &options(), 1e-3).unwrap();
        (r.passed, format!("min margin {:.3e} >= -1e-3 at t in {{0, 0.1, 0.2}}", r.worst_margin))
    });

    suite.run(13, "HJB and transport residuals at s = 1/2", || {
        let fine_grid = grid(1121);
        let fine = solve(&normal(&fine_grid, -2.0, 1.0), &normal(&fine_grid, 2.0, 1.0));
        let (c_phi, c_psi) = hjb_residuals(&sol, 0.5, 1e-3).unwrap();
        let c_mu = transport_residual(&sol, 0.5, 1e-3).unwrap();
        let (f_phi, f_psi) = hjb_residuals(&fine, 0.5, 5e-4).unwrap();
        let f_mu = transport_residual(&fine, 0.5, 5e-4).unwrap();
        let pairs = [("hjb_phi", c_phi, f_phi), ("hjb_psi", c_psi, f_psi), ("transport", c_mu, f_mu)];
        let ok = pairs.iter().all(|&(_, c, f)| c <= 1e-3 && f <= 1e-3 && c >= 3.0 * f);
        let text = pairs
            .iter()
            .map(|(n, c, f)| format!("{n} {c:.3e} -> {f:.3e} (x{:.2})", c / f))
            .collect::<Vec<_>>()
            .join(", ");
        (ok, format!("{text}; each <= 1e-3 and reduced >= 3x"))
    });

    suite.run(14, "deterministic verify reports", || {
        let tmp = tempfile::TempDir::new().unwrap();
        let cfg = tmp.path().join("benchmark.json");
        fs::write(
            &cfg,
            r#"{
  "grid": {"dim": 1, "lo": -14, "hi": 14, "points": 561},
  "marginals": {
    "mu0": {"type": "gaussian", "mean": [-2], "sigma": [1]},
    "mu1": {"type": "gaussian", "mean": [2], "sigma": [1]}
  },
  "eps": 1.0,
  "solver": {"max_iter": 10000, "tol": 1e-9}
}"#,
        )
        .unwrap();
        let first = cmd_verify(&RunArgs::new(&cfg, tmp.path().join("a"))).unwrap();
        let second = cmd_verify(&RunArgs::new(&cfg, tmp.path().join("b"))).unwrap();
        let a = fs::read(&first[0]).unwrap();
        let b = fs::read(&second[0]).unwrap();
        (a == b, format!("two runs of all checks, {} bytes each, identical = {}", a.len(), a == b))
    });

    println!(
        "acceptance: {} of 14 criteria passed in {:.1}s",
        14 - suite.failures.len(),
        t0.elapsed().as_secs_f64()
    );
    if !suite.failures.is_empty() {
        println!("acceptance: failed criteria {:?}", suite.failures);
        std::process::exit(1);
    }
}

mod common;

use common::*;
use entropic_core::*;
use proptest::prelude::*;

fn coarse_grid() -> std::sync::Arc<Grid> {
    build_grid(1, -14.0, 14.0, 281).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solutions_reproduce_marginals(m0 in -2.0f64..2.0, m1 in -2.0f64..2.0, a in 0.6f64..1.2, b in 0.6f64..1.2, eps in 0.3f64..2.0) {
        let g = coarse_grid();
        let sol = solve_system(&normal(&g, m0, a), &normal(&g, m1, b), eps, 10_000, 1e-9).unwrap();
        prop_assert!(sol.converged());
        let (r0, r1) = marginal_residuals(&sol).unwrap();
        prop_assert!(r0 <= 1e-9 && r1 <= 1e-9);
    }

    #[test]
    fn cost_is_symmetric_and_dual_tight(m0 in -2.0f64..2.0, m1 in -2.0f64..2.0, a in 0.6f64..1.2, b in 0.6f64..1.2) {
        let g = coarse_grid();
        let (u, v) = (normal(&g, m0, a), normal(&g, m1, b));
        let fwd = solve_system(&u, &v, 1.0, 10_000, 1e-9).unwrap();
        let rev = solve_system(&v, &u, 1.0, 10_000, 1e-9).unwrap();
        let p = entropic_cost_primal(&fwd).unwrap();
        prop_assert!((p - entropic_cost_primal(&rev).unwrap()).abs() <= 1e-10);
        prop_assert!((p - entropic_cost_dual(&fwd).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn interpolation_invariants_on_s_grid(m0 in -2.0f64..2.0, m1 in -2.0f64..2.0, a in 0.6f64..1.2, b in 0.6f64..1.2) {
        let g = coarse_grid();
        let sol = solve_system(&normal(&g, m0, a), &normal(&g, m1, b), 1.0, 10_000, 1e-9).unwrap();
        let path = sample_path(&sol, 65).unwrap();
        for p in &path {
            prop_assert!(p.mu_s.values().iter().all(|&v| v >= 0.0));
            prop_assert!((integrate(p.mu_s.field()).unwrap() - 1.0).abs() <= 1e-8);
            for (i, &m) in p.mu_s.values().iter().enumerate() {
                if m > 1e-300 {
                    let e = (p.phi_s.values()[i] + p.psi_s.values()[i]).exp();
                    prop_assert!((e - m).abs() <= 1e-12 * m);
                }
            }
            prop_assert!(p.h_second - p.h_prime * p.h_prime >= -1e-6);
        }
        let h: Vec<f64> = path.iter().map(|p| p.h).collect();
        prop_assert!(h.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-6));
    }

    #[test]
    fn potentials_are_gauge_free(shift in -5.0f64..5.0) {
        let g = coarse_grid();
        let sol = solve_system(&normal(&g, -1.0, 1.0), &normal(&g, 1.0, 0.8), 1.0, 10_000, 1e-9).unwrap();
        let moved = BridgeSolution::from_potentials(
            sol.mu0().clone(),
            sol.mu1().clone(),
            1.0,
            sol.log_f().map(|v| v + shift).unwrap(),
            sol.log_g().map(|v| v - shift).unwrap(),
            1e-9,
        ).unwrap();
        prop_assert!((entropic_cost_primal(&moved).unwrap() - entropic_cost_primal(&sol).unwrap()).abs() <= 1e-10);
        let (x, y) = (interpolate(&sol, 0.3).unwrap(), interpolate(&moved, 0.3).unwrap());
        prop_assert!((x.h - y.h).abs() <= 1e-12);
    }

    #[test]
    fn trapezoid_exact_for_affine(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let g = build_grid(2, -3.0, 2.0, 23).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| a + b * x[0] + c * x[1]).unwrap();
        let exact = 25.0 * (a + b * (-0.5) + c * (-0.5));
        prop_assert!((integrate(&f).unwrap() - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }
}

#[test]
fn reversed_bridge_mirrors_samples() {
    let g = benchmark_grid();
    let (u, v) = (normal(&g, -2.0, 1.0), normal(&g, 2.0, 1.2));
    let fwd = solve_system(&u, &v, 1.0, 10_000, 1e-9).unwrap();
    let rev = solve_system(&v, &u, 1.0, 10_000, 1e-9).unwrap();
    for s in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let a = interpolate(&fwd, s).unwrap();
        let b = interpolate(&rev, 1.0 - s).unwrap();
        let d = a.mu_s.values().iter().zip(b.mu_s.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d <= 1e-9 && (a.h - b.h).abs() <= 1e-9, "s {s}: {d}");
    }
}

#[test]
fn entropy_derivatives_match_finite_differences() {
    let g = benchmark_grid();
    let sol = solve_system(&normal(&g, -2.0, 1.0), &normal(&g, 2.0, 1.0), 1.0, 10_000, 1e-9).unwrap();
    let h = |s: f64| interpolate(&sol, s).unwrap().h;
    let d = 1e-3;
    for s in [0.0, 0.37, 1.0] {
        let sample = interpolate(&sol, s).unwrap();
        let (fd1, fd2) = if s == 0.0 {
            ((-3.0 * h(0.0) + 4.0 * h(d) - h(2.0 * d)) / (2.0 * d), (2.0 * h(0.0) - 5.0 * h(d) + 4.0 * h(2.0 * d) - h(3.0 * d)) / (d * d))
        } else if s == 1.0 {
            ((3.0 * h(1.0) - 4.0 * h(1.0 - d) + h(1.0 - 2.0 * d)) / (2.0 * d), (2.0 * h(1.0) - 5.0 * h(1.0 - d) + 4.0 * h(1.0 - 2.0 * d) - h(1.0 - 3.0 * d)) / (d * d))
        } else {
            ((h(s + d) - h(s - d)) / (2.0 * d), (h(s + d) - 2.0 * h(s) + h(s - d)) / (d * d))
        };
        assert!((sample.h_prime - fd1).abs() <= 1e-4, "s {s}");
        assert!((sample.h_second - fd2).abs() <= 1e-3, "s {s}");
    }
}

mod common;

use adaptive_ph::model::{BoxBounds, FunctionFamily};
use adaptive_ph::prox::{solve_prox, ProxQuery, SolverTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn quadratic_matches_closed_form_on_1000_queries() {
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let family = FunctionFamily::QuadraticTracking {};
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let v = |rng: &mut ChaCha20Rng, s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
        let omega = v(&mut rng, 20.0);
        let lambda = v(&mut rng, 5.0);
        let xbar = v(&mut rng, 10.0);
        let rho = rng.random_range(0.01..10.0);
        let bounds = BoxBounds {
            lo: vec![-10.0; n],
            hi: vec![10.0; n],
        };
        let r = solve_prox(&ProxQuery {
            omega: &omega,
            lambda: &lambda,
            xbar: &xbar,
            rho,
            family: &family,
            bounds: &bounds,
        })
        .unwrap();
        for i in 0..n {
            let expect = ((omega[i] + rho * xbar[i] - lambda[i]) / (1.0 + rho)).clamp(-10.0, 10.0);
            assert!((r.x_opt[i] - expect).abs() <= 1e-12, "{} vs {expect}", r.x_opt[i]);
        }
        assert_eq!(r.solver_tag, SolverTag::Exact);
    }
}

#[test]
fn quadratic_1d_agrees_with_grid() {
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let family = FunctionFamily::QuadraticTracking {};
    let bounds = BoxBounds {
        lo: vec![-10.0],
        hi: vec![10.0],
    };
    for _ in 0..20 {
        let (w, l, c, rho) = (
            rng.random_range(-30.0..30.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(0.1..4.0),
        );
        let r = solve_prox(&ProxQuery {
            omega: &[w],
            lambda: &[l],
            xbar: &[c],
            rho,
            family: &family,
            bounds: &bounds,
        })
        .unwrap();
        let grid = common::grid_argmin_1d(
            |x| 0.5 * (x - w) * (x - w) + l * (x - c) + 0.5 * rho * (x - c) * (x - c),
            -10.0,
            10.0,
        );
        assert!((r.x_opt[0] - grid).abs() < 1e-6);
    }
}

#[test]
fn max_affine_matches_reference_on_200_queries() {
    let mut rng = ChaCha20Rng::seed_from_u64(47);
    let mut iterative = 0;
    for case in 0..200 {
        let c = common::random_piece_case(&mut rng);
        let r = solve_prox(&ProxQuery {
            omega: &[],
            lambda: &c.lambda,
            xbar: &c.center,
            rho: c.rho,
            family: &c.family,
            bounds: &c.bounds,
        })
        .unwrap();
        if r.solver_tag == SolverTag::Iterative {
            iterative += 1;
        }
        let (reference, radius) =
            common::dual_prox_oracle(&c.slopes, &c.intercepts, &c.lambda, &c.center, c.rho, &c.bounds.lo, &c.bounds.hi);
        assert!(radius < 5e-6, "case {case}: reference only certified to {radius}");
        let err = r.x_opt.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-5, "case {case}: {:?} vs {:?}", r.x_opt, reference);
        if c.center.len() == 1 {
            let f = |x: f64| {
                let h = (0..c.slopes.len())
                    .map(|p| c.slopes[p][0] * x + c.intercepts[p])
                    .fold(f64::NEG_INFINITY, f64::max);
                h + c.lambda[0] * (x - c.center[0]) + 0.5 * c.rho * (x - c.center[0]).powi(2)
            };
            let grid = common::grid_argmin_1d(f, c.bounds.lo[0], c.bounds.hi[0]);
            assert!((r.x_opt[0] - grid).abs() <= 1e-5, "case {case}: grid {grid}");
        }
    }
    // the box binds often enough that both code paths are exercised
    assert!(iterative > 0 && iterative < 200, "iterative count {iterative}");
}

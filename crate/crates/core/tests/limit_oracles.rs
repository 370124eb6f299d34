mod common;

use common::{adaptive_simpson, env, scenario_b};
use contagion_core::limit::{limit_loss, solve_limit};
use contagion_core::FirmClass;
use proptest::prelude::*;

/// With alpha = beta = 1, gamma = 0 and a single class, separation of
/// variables gives `int_0^q e^{-u} / (1 - u) du = t`.
fn implicit_oracle(t: f64) -> f64 {
    let f = |u: f64| (-u).exp() / (1.0 - u);
    let primitive = |q: f64| adaptive_simpson(&f, 0.0, q, 1e-14);
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-15);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if primitive(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn self_excited_single_class_matches_implicit_relation() {
    let e = env(&[(1.0, 1.0, 0.0, 1.0, 1.0)]);
    let sol = solve_limit(&e, 2.0, 4096, 1e-8).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let g = sol.grid_index(t).unwrap();
        let expected = implicit_oracle(t);
        let got = sol.q[g][0];
        assert!((got - expected).abs() < 1e-7, "t={t}: {got} vs {expected}");
    }
}

#[test]
fn fixed_point_self_consistency() {
    for e in [scenario_b(), common::mixed_pair(), common::reciprocal_mixture()] {
        let sol = solve_limit(&e, 5.0, 4096, 1e-8).unwrap();
        for (k, c) in e.classes().iter().enumerate() {
            let rederived = sol.off_support_curve(c);
            for (g, q) in rederived.iter().enumerate() {
                assert!((q - sol.q[g][k]).abs() <= 10.0 * 1e-8);
            }
        }
    }
}

#[test]
fn limit_loss_is_mixture_of_curves() {
    let e = env(&[(2.0, 1.0, 1.0, 3.0, 0.25), (1.0, 0.5, 2.0, 0.5, 0.75)]);
    let sol = solve_limit(&e, 3.0, 1024, 1e-8).unwrap();
    let l = limit_loss(&sol, &e).unwrap();
    for (g, lg) in l.iter().enumerate() {
        let direct = 0.25 * 3.0 * sol.q[g][0] + 0.75 * 0.5 * sol.q[g][1];
        assert!((lg - direct).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn more_contagion_means_more_defaults(s1 in 1.0f64..1.5, s2 in 1.0f64..1.5) {
        let base = scenario_b();
        let bumped = contagion_core::Environment::new(
            base.classes()
                .iter()
                .zip([s1, s2])
                .map(|(c, s)| FirmClass { beta: c.beta * s, ..*c })
                .collect(),
        )
        .unwrap();
        let a = solve_limit(&base, 5.0, 2048, 1e-7).unwrap();
        let b = solve_limit(&bumped, 5.0, 2048, 1e-7).unwrap();
        for (ra, rb) in a.q.iter().zip(&b.q) {
            for (qa, qb) in ra.iter().zip(rb) {
                prop_assert!(qb >= qa);
            }
        }
    }

    #[test]
    fn solution_stays_in_unit_box(
        alpha in 0.0f64..3.0,
        beta in 0.0f64..3.0,
        gamma in -1.0f64..4.0,
        p in 0.05f64..0.95,
    ) {
        let e = env(&[(alpha, beta, gamma, 1.0, p), (0.5, 0.2, 2.0, 1.0, 1.0 - p)]);
        let sol = solve_limit(&e, 3.0, 2048, 1e-6).unwrap();
        for k in 0..2 {
            let col = sol.class_curve(k);
            prop_assert!(col.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(col.iter().all(|q| (0.0..=1.0).contains(q)));
        }
        prop_assert!(sol.m.iter().all(|&m| m <= e.max_aggregate() + 1e-15));
    }
}

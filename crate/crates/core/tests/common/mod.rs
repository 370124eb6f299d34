#![allow(dead_code)]

use std::path::PathBuf;

use contagion_core::{Environment, FirmClass};

pub fn env(classes: &[(f64, f64, f64, f64, f64)]) -> Environment {
    Environment::new(
        classes
            .iter()
            .map(|&(a, b, g, e, p)| FirmClass::new(a, b, g, e, p))
            .collect(),
    )
    .unwrap()
}

/// Two-type mixture with contagion-sensitive share `p`.
pub fn two_type(p: f64) -> Environment {
    env(&[(4.0, 4.0, 3.0, 1.0, p), (0.1, 0.1, 3.0, 1.0, 1.0 - p)])
}

pub fn scenario_b() -> Environment {
    two_type(0.4)
}

pub fn mixed_pair() -> Environment {
    env(&[(3.0, 3.0, 3.0, 1.0, 0.5), (0.1, 0.1, 1.0, 1.0, 0.5)])
}

pub fn reciprocal_mixture() -> Environment {
    env(&[(2.0, 6.0, 4.0, 1.0, 0.4), (1.0, 3.0, 5.0, 1.0, 0.6)])
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

/// Composite adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

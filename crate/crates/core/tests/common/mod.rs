#![allow(dead_code)]

use std::path::PathBuf;

use extremal_lab::extremal::{shoot, ShootOptions, Trajectory};
use extremal_lab::problem::Problem;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> Problem {
    Problem::load(fixture(name)).unwrap()
}

pub fn shot(p: &Problem, guess: &[f64]) -> Trajectory {
    let r = shoot(p, guess, ShootOptions::default()).unwrap();
    assert!(r.converged, "residual {:e}", r.residual_norm());
    r.trajectory
}

/// A random smooth expression in `vars`, finite and differentiable on [-1, 1]^d.
pub fn random_expr<R: Rng>(rng: &mut R, vars: &[&str], depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            vars[rng.gen_range(0..vars.len())].to_string()
        } else {
            format!("{:.3}", rng.gen_range(0.5..3.0))
        };
    }
    let a = random_expr(rng, vars, depth - 1);
    match rng.gen_range(0..10) {
        0 => format!("({a} + {})", random_expr(rng, vars, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, vars, depth - 1)),
        2 | 3 => format!("({a})*({})", random_expr(rng, vars, depth - 1)),
        4 => format!("({a})/(1 + ({})^2)", random_expr(rng, vars, depth - 1)),
        5 => format!("({a})^{}", rng.gen_range(2..4)),
        6 => format!("sin({a})"),
        7 => format!("cos({a})"),
        8 => format!("exp(sin({a}))"),
        _ => format!("sqrt(1 + ({a})^2)"),
    }
}

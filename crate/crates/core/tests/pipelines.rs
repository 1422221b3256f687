mod common;

use common::{fixture, load, shot};
use extremal_lab::conservation::monitor;
use extremal_lab::noether::{conserved_quantity, load_family};

fn rk4_tol(steps: usize) -> f64 {
    (1.0 / steps as f64).powi(4) * 10.0
}

#[test]
fn oscillator_matches_hyperbolic_sine() {
    let p = load("oscillator.prob");
    let tr = shot(&p, &[1.0]);
    let tol = rk4_tol(tr.len() - 1);
    for (t, x) in tr.grid.iter().zip(&tr.x) {
        assert!((x[0] - t.sinh() / 1f64.sinh()).abs() <= tol, "t={t}: {}", x[0]);
    }
    // autonomous: H is a first integral
    assert!(tr.hamiltonian_drift() <= 1e-8, "drift {:e}", tr.hamiltonian_drift());
    let coth = 1f64.cosh() / 1f64.sinh();
    assert!((tr.cost - coth).abs() <= 1e-8, "cost {}", tr.cost);
}

#[test]
fn forced_problem_follows_cubic_and_hamiltonian_balance() {
    let p = load("forced.prob");
    let tr = shot(&p, &[0.0]);
    let h0 = tr.h[0];
    for k in 0..tr.len() {
        let t = tr.grid[k];
        let x = t.powi(3) / 12.0 + 11.0 * t / 12.0;
        assert!((tr.x[k][0] - x).abs() <= 1e-9, "x({t})");
        // dH/dt = -x
        let drop = -(t.powi(4) / 48.0 + 11.0 * t * t / 24.0);
        assert!((tr.h[k] - h0 - drop).abs() <= 1e-9, "H({t})");
    }
}

#[test]
fn quartic_implicit_control_is_constant() {
    let p = load("quartic.prob");
    let tr = shot(&p, &[1.0]);
    for k in 0..tr.len() {
        assert!((tr.psi[k][0] - 6.0).abs() <= 1e-8, "psi {}", tr.psi[k][0]);
        assert!((tr.u[k][0] - 1.0).abs() <= 1e-8, "u {}", tr.u[k][0]);
    }
    assert!((tr.cost - 2.0).abs() <= 1e-8);
}

#[test]
fn noether_quantity_is_constant_along_extremal() {
    let p = load("quadratic.prob");
    let fam = load_family(fixture("shift.fam")).unwrap();
    let c = conserved_quantity(&p, &fam, 0);
    let tr = shot(&p, &[1.0]);
    let d = monitor(&c, &tr).unwrap();
    assert!(d.max <= 1e-9, "drift {:e}", d.max);
}

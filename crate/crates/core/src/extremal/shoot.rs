use nalgebra::{DMatrix, DVector};

use crate::config;
use crate::problem::Problem;

use super::{CanonicalSystem, ExtremalError, Trajectory};

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { steps: config::DEFAULT_STEPS, tol: config::SHOOT_TOL, max_iter: config::SHOOT_MAX_ITER }
    }
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub trajectory: Trajectory,
    /// `x(b) - x_b`
    pub residual: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub psi_a: Vec<f64>,
}

impl ShootingResult {
    pub fn residual_norm(&self) -> f64 {
        inf_norm(&self.residual)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn missing(p: &Problem) -> Option<String> {
    let mut out = Vec::new();
    for (i, x) in p.states().iter().enumerate() {
        if p.x_t0()[i].is_none() {
            out.push(format!("{x}(t0)"));
        }
        if p.x_t1()[i].is_none() {
            out.push(format!("{x}(t1)"));
        }
    }
    (!out.is_empty()).then(|| out.join(", "))
}

/// Single shooting on `ψ(a) ↦ x(b; ψ(a)) - x_b`: Newton with a forward-difference
/// Jacobian and half-step backtracking when the residual does not decrease.
pub fn shoot(p: &Problem, guess_psi_a: &[f64], opts: ShootOptions) -> Result<ShootingResult, ExtremalError> {
    if let Some(m) = missing(p) {
        return Err(ExtremalError::BoundaryIncomplete(m));
    }
    let n = p.n();
    if guess_psi_a.len() != n {
        return Err(ExtremalError::Dimension { what: "psi(a) guess".into(), expected: n, got: guess_psi_a.len() });
    }
    let x_a = p.initial_state().expect("checked");
    let x_b = p.terminal_state().expect("checked");
    let sys = CanonicalSystem::new(p)?;

    let run = |psi_a: &[f64]| -> Result<(Trajectory, Vec<f64>), ExtremalError> {
        let tr = sys.integrate(&x_a, psi_a, opts.steps)?;
        let last = tr.x.last().expect("nonempty grid");
        let res = last.iter().zip(&x_b).map(|(x, b)| x - b).collect();
        Ok((tr, res))
    };

    let mut psi_a = guess_psi_a.to_vec();
    let (mut tr, mut res) = run(&psi_a)?;
    let mut iterations = 0;
    while inf_norm(&res) > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = config::SHOOT_FD_STEP * (1.0 + psi_a[j].abs());
            let mut pert = psi_a.clone();
            pert[j] += h;
            let (_, r) = run(&pert)?;
            for i in 0..n {
                jac[(i, j)] = (r[i] - res[i]) / h;
            }
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|v| -v));
        let delta = jac
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or(ExtremalError::SingularJacobian { iteration: iterations })?;
        if jac.rank(1e-12 * jac.amax().max(1.0)) < n {
            return Err(ExtremalError::SingularJacobian { iteration: iterations });
        }

        let current = inf_norm(&res);
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..=config::SHOOT_MAX_HALVINGS {
            let trial: Vec<f64> = psi_a.iter().zip(delta.iter()).map(|(p, d)| p + lambda * d).collect();
            if let Ok((t, r)) = run(&trial) {
                if inf_norm(&r) < current {
                    accepted = Some((trial, t, r));
                    break;
                }
                fallback = Some((trial, t, r));
            }
            lambda *= 0.5;
        }
        // with no decrease after every halving, take the shortest step anyway
        match accepted.or(fallback) {
            Some((p, t, r)) => {
                psi_a = p;
                tr = t;
                res = r;
            }
            None => break,
        }
    }
    tr.check_nontrivial()?;
    let converged = inf_norm(&res) <= opts.tol;
    Ok(ShootingResult { trajectory: tr, residual: res, iterations, converged, psi_a })
}

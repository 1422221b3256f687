//! Conservation laws along Pontryagin extremals.
//!
//! Along an extremal `dF/dt = ∂F/∂t + {F, H}` with
//! `{F, H} = Σ ∂F/∂x_i ∂H/∂ψ_i - ∂F/∂ψ_i ∂H/∂x_i`, so `F` is conserved exactly when
//! that residual vanishes on the stationarity manifold `∂H/∂u = 0`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config;
use crate::extremal::Trajectory;
use crate::problem::{
    costate_name, eliminate_control, hamiltonian, ControlLaw, ControlSolver, Problem, ProblemError, HAMILTONIAN, PSI0,
    TIME,
};
use crate::symbolic::{
    differentiate, evaluate, substitute, substitute_values, symbolically_zero, tidy, Bindings, Compiled, Expr, NUMERIC_ZERO_POINTS,
    NUMERIC_ZERO_TOL,
};

#[derive(Debug, Error)]
pub enum ConservationError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("unknown variable '{0}' in F")]
    UnknownVariable(String),
    #[error("F cannot be evaluated at t = {t}: {reason}")]
    Evaluation { t: f64, reason: String },
    #[error("could not sample {wanted} points on the stationarity manifold (got {got})")]
    Sampling { wanted: usize, got: usize },
    #[error("inconclusive: largest sampled residual {max:e} lies between the zero tolerance and the violation threshold")]
    Inconclusive { max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SymbolicZero,
    NumericZero,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub f_initial: f64,
    /// `max_k |F(t_k) - F(t_0)| / (1 + |F(t_0)|)`
    pub max: f64,
    pub mean: f64,
    /// Node of the largest deviation.
    pub worst_t: f64,
}

/// A sampled point and the residual there.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: BTreeMap<String, f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationVerdict {
    pub mode: Mode,
    /// `∂F/∂t + {F, H}` as tested (after control substitution when `on_shell`).
    #[serde(serialize_with = "crate::report::as_string")]
    pub residual: Expr,
    /// The control law was substituted before the final test.
    pub on_shell: bool,
    pub witness: Option<Witness>,
    pub drift: Option<Drift>,
    pub warnings: Vec<String>,
}

/// `Σ ∂F/∂x_i ∂H/∂psi_i - ∂F/∂psi_i ∂H/∂x_i` over the given states, canonical form.
pub fn poisson_bracket<S: AsRef<str>>(f: &Expr, h: &Expr, states: &[S]) -> Expr {
    let mut terms = Vec::with_capacity(2 * states.len());
    for (i, x) in states.iter().enumerate() {
        let psi = costate_name(i);
        let x = x.as_ref();
        terms.push(differentiate(f, x).times(differentiate(h, &psi)));
        terms.push(differentiate(f, &psi).times(differentiate(h, x)).neg());
    }
    Expr::sum(terms)
}

/// `{F,{G,H}} + {G,{H,F}} + {H,{F,G}}` at one point.
pub fn jacobi_residual<S: AsRef<str>>(f: &Expr, g: &Expr, h: &Expr, states: &[S], at: &Bindings) -> Result<f64, crate::symbolic::SymbolicError> {
    let pb = |a: &Expr, b: &Expr| poisson_bracket(a, b, states);
    let total = Expr::sum(vec![pb(f, &pb(g, h)), pb(g, &pb(h, f)), pb(h, &pb(f, g))]);
    evaluate(&total, at)
}

fn symbols(p: &Problem) -> Vec<String> {
    let mut s = vec![TIME.to_string(), PSI0.to_string(), HAMILTONIAN.to_string()];
    s.extend(p.states().iter().cloned());
    s.extend(p.controls().iter().cloned());
    s.extend(p.costates());
    s
}

/// Replaces `H` by the Hamiltonian and `psi0` by the problem's multiplier.
pub fn resolve(p: &Problem, f: &Expr) -> Result<Expr, ConservationError> {
    let known = symbols(p);
    if let Some(v) = f.free_vars().into_iter().find(|v| !known.contains(v)) {
        return Err(ConservationError::UnknownVariable(v));
    }
    let h = hamiltonian(p);
    let with_h = substitute(f, &HashMap::from([(HAMILTONIAN.to_string(), h.h)]));
    Ok(substitute_values(&with_h, &[(PSI0, p.psi0())]))
}

/// Conservation criterion for `F` on the extremals of `p`.
///
/// With a closed-form control law and `u`-dependent `F`, the law is substituted into
/// `F` first, which keeps the criterion exact without assuming `F` is maximal in `u`.
pub fn check_conservation<R: Rng>(p: &Problem, f: &Expr, rng: &mut R) -> Result<ConservationVerdict, ConservationError> {
    let f = resolve(p, f)?;
    let h = hamiltonian(p);
    let law = eliminate_control(&h)?;
    let hh = h.with_multiplier(&h.h);
    let mut warnings = Vec::new();

    let criterion = |f: &Expr, h: &Expr| Expr::sum(vec![differentiate(f, TIME), poisson_bracket(f, h, p.states())]);
    let depends_on_u = f.depends_on_any(p.controls());

    let residual = criterion(&f, &hh);
    if !depends_on_u && symbolically_zero(&residual) {
        return Ok(verdict(Mode::SymbolicZero, residual, false, None, warnings));
    }

    let on_shell = match law.assignments() {
        Some(a) => {
            let r = if depends_on_u {
                criterion(&substitute(&f, &a), &substitute(&hh, &a))
            } else {
                substitute(&residual, &a)
            };
            if symbolically_zero(&r) {
                return Ok(verdict(Mode::SymbolicZero, r, true, None, warnings));
            }
            Some(r)
        }
        None => {
            if depends_on_u {
                warnings.push(
                    "F depends on u and the control law is implicit: the bracket criterion assumes F is maximal in u along extremals"
                        .into(),
                );
            }
            None
        }
    };
    let (tested, shell) = match on_shell {
        Some(r) => (r, true),
        None => (residual, false),
    };

    // numeric tier on the stationarity manifold
    let layout = p.layout();
    let compiled = Compiled::new(&tested, layout.names()).map_err(ProblemError::from)?;
    let solver = ControlSolver::new(&law, &layout)?;
    let mut worst: Option<(Vec<f64>, f64)> = None;
    let mut got = 0;
    let mut attempts = 0;
    while got < NUMERIC_ZERO_POINTS && attempts < 50 * NUMERIC_ZERO_POINTS {
        attempts += 1;
        let mut pt = layout.point();
        pt[layout.t()] = rng.gen_range(-2.0..2.0);
        for i in 0..p.n() {
            pt[layout.x(i)] = rng.gen_range(-2.0..2.0);
            pt[layout.psi(i)] = rng.gen_range(-2.0..2.0);
        }
        pt[layout.psi0()] = p.psi0();
        let guess: Vec<f64> = (0..p.r()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if solver.solve(&mut pt, &guess).is_err() {
            continue;
        }
        let Ok(v) = compiled.eval(&pt) else { continue };
        got += 1;
        if worst.as_ref().is_none_or(|(_, w)| v.abs() > w.abs()) {
            worst = Some((pt, v));
        }
    }
    if got < NUMERIC_ZERO_POINTS {
        return Err(ConservationError::Sampling { wanted: NUMERIC_ZERO_POINTS, got });
    }
    let (pt, v) = worst.expect("sampled");
    if v.abs() < NUMERIC_ZERO_TOL {
        return Ok(verdict(Mode::NumericZero, tested, shell, None, warnings));
    }
    if v.abs() <= config::VIOLATION_WITNESS_MIN {
        return Err(ConservationError::Inconclusive { max: v.abs() });
    }
    let point = layout.names().iter().cloned().zip(pt).collect();
    Ok(verdict(Mode::Violated, tested, shell, Some(Witness { point, value: v }), warnings))
}

fn verdict(mode: Mode, residual: Expr, on_shell: bool, witness: Option<Witness>, warnings: Vec<String>) -> ConservationVerdict {
    ConservationVerdict { mode, residual: tidy(&residual), on_shell, witness, drift: None, warnings }
}

/// Deviation of `F` from its initial value along `traj`. `H` in `F` takes the
/// trajectory's Hamiltonian column.
pub fn monitor(f: &Expr, traj: &Trajectory) -> Result<Drift, ConservationError> {
    let mut values = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let v = evaluate(f, &traj.bindings(k)).map_err(|e| ConservationError::Evaluation { t: traj.grid[k], reason: e.to_string() })?;
        values.push(v);
    }
    Ok(drift_of(&values, &traj.grid))
}

pub(crate) fn drift_of(values: &[f64], grid: &[f64]) -> Drift {
    let f0 = values[0];
    let scale = 1.0 + f0.abs();
    let mut max = 0.0;
    let mut worst_t = grid[0];
    let mut sum = 0.0;
    for (v, t) in values.iter().zip(grid) {
        let d = (v - f0).abs() / scale;
        sum += d;
        if d > max {
            max = d;
            worst_t = *t;
        }
    }
    Drift { f_initial: f0, max, mean: sum / values.len() as f64, worst_t }
}

/// Control law used by the check, for reporting.
pub fn law_for(p: &Problem) -> Result<ControlLaw, ConservationError> {
    Ok(eliminate_control(&hamiltonian(p))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pr(l: &str, dynamics: &[(&str, &str)], controls: &str) -> Problem {
        let mut s = format!(
            "[problem]\nt0=0\nt1=1\nstates={}\ncontrols={controls}\n[lagrangian]\nL=\"{l}\"\n[dynamics]\n",
            dynamics.iter().map(|d| d.0).collect::<Vec<_>>().join(",")
        );
        for (x, f) in dynamics {
            s.push_str(&format!("{x}=\"{f}\"\n"));
        }
        Problem::from_text(&s).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn bracket_examples() {
        let h = parse("psi0*u^2 + psi1*u*x1").unwrap();
        assert!(poisson_bracket(&h, &h, &["x1"]).is_zero());
        assert!(poisson_bracket(&parse("psi1*x1").unwrap(), &h, &["x1"]).is_zero());
        assert_eq!(poisson_bracket(&parse("x1").unwrap(), &parse("psi1*u").unwrap(), &["x1"]), parse("u").unwrap());
    }

    #[test]
    fn multiplicative_problem_laws() {
        let p = pr("u1^2", &[("x1", "u1*x1")], "u1");
        let v = check_conservation(&p, &parse("psi1*x1").unwrap(), &mut rng()).unwrap();
        assert_eq!(v.mode, Mode::SymbolicZero);
        let v = check_conservation(&p, &parse("H*psi1*x1").unwrap(), &mut rng()).unwrap();
        assert_eq!(v.mode, Mode::SymbolicZero);
        assert!(v.on_shell);
    }

    #[test]
    fn homogeneous_cubic_polynomial_problem() {
        let p = pr("u1^2", &[("x1", "x2"), ("x2", "x1*u1")], "u1");
        let v = check_conservation(&p, &parse("psi1*x1 + psi2*x2").unwrap(), &mut rng()).unwrap();
        assert!(matches!(v.mode, Mode::SymbolicZero | Mode::NumericZero));
    }

    #[test]
    fn position_is_not_conserved() {
        let p = pr("u1^2", &[("x1", "u1")], "u1");
        let v = check_conservation(&p, &parse("x1").unwrap(), &mut rng()).unwrap();
        assert_eq!(v.mode, Mode::Violated);
        assert!(v.witness.unwrap().value.abs() > 1e-6);
    }

    #[test]
    fn hamiltonian_of_autonomous_problem() {
        let p = pr("u1^4 + u1^2 + x1^2", &[("x1", "u1")], "u1");
        let v = check_conservation(&p, &parse("H").unwrap(), &mut rng()).unwrap();
        assert!(v.mode != Mode::Violated);
    }

    #[test]
    fn unknown_symbol_in_f() {
        let p = pr("u1^2", &[("x1", "u1")], "u1");
        assert!(matches!(
            check_conservation(&p, &parse("y").unwrap(), &mut rng()),
            Err(ConservationError::UnknownVariable(_))
        ));
    }

    #[test]
    fn clock_drift() {
        let p = pr("u1^2", &[("x1", "u1")], "u1");
        let tr = crate::extremal::integrate(&p, &[0.0], &[2.0], 32).unwrap();
        let d = monitor(&parse("t").unwrap(), &tr).unwrap();
        assert_eq!(d.max, 1.0);
        let d = monitor(&parse("psi1*t + 2*psi0*x1").unwrap(), &tr).unwrap();
        assert!(d.max < 1e-12);
    }
}

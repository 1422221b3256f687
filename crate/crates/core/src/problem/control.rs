use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config;
use crate::symbolic::{differentiate, substitute, tidy, symbolically_zero, Compiled, Expr};

use super::{Hamiltonian, Layout, ProblemError, TIME};

/// Newton solve of `∂H/∂u = 0`, warm-started from the previous grid node (zero at the first).
#[derive(Debug, Clone)]
pub struct NewtonSpec {
    pub max_iter: usize,
    pub tol: f64,
    pub warm_start: bool,
    /// `∂H/∂u` with the multiplier substituted.
    pub stationarity: Vec<Expr>,
    /// `∂²H/∂u²`, row-major.
    pub hessian: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone)]
pub enum ControlLaw {
    /// `u_j = exprs[j]` in terms of `t`, states and costates.
    Closed { controls: Vec<String>, exprs: Vec<Expr> },
    Implicit { controls: Vec<String>, spec: NewtonSpec },
}

impl ControlLaw {
    pub fn controls(&self) -> &[String] {
        match self {
            ControlLaw::Closed { controls, .. } | ControlLaw::Implicit { controls, .. } => controls,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, ControlLaw::Closed { .. })
    }

    /// Substitution map `u_j -> u*_j` for a closed-form law.
    pub fn assignments(&self) -> Option<HashMap<String, Expr>> {
        match self {
            ControlLaw::Closed { controls, exprs } => {
                Some(controls.iter().cloned().zip(exprs.iter().cloned()).collect())
            }
            ControlLaw::Implicit { .. } => None,
        }
    }
}

fn hessian(h: &Expr, controls: &[String]) -> Vec<Vec<Expr>> {
    let grad: Vec<Expr> = controls.iter().map(|u| differentiate(h, u)).collect();
    grad.iter()
        .map(|g| controls.iter().map(|u| differentiate(g, u)).collect())
        .collect()
}

fn is_zero(e: &Expr) -> bool {
    symbolically_zero(e)
}

/// Eliminates the control through the stationarity condition `∂H/∂u = 0`.
///
/// When `∂H/∂u` is affine in `u` with a `u`-free coefficient matrix the system is
/// solved by symbolic Gauss–Jordan elimination; otherwise an implicit Newton law is returned.
pub fn eliminate_control(h: &Hamiltonian) -> Result<ControlLaw, ProblemError> {
    let controls = h.controls.clone();
    let hh = h.with_multiplier(&h.h);
    if !hh.depends_on_any(&controls) {
        // H carries no information about u; every control is optimal, pick 0.
        return Ok(ControlLaw::Closed { exprs: vec![Expr::zero(); controls.len()], controls });
    }
    let g: Vec<Expr> = h.dh_du.iter().map(|e| h.with_multiplier(e)).collect();
    let hess = hessian(&hh, &controls);

    if g.iter().all(|gj| !gj.depends_on_any(&controls)) {
        if h.psi0 == 0.0 && forces_trivial_costate(h, &g) {
            return Err(ProblemError::TrivialMultiplier);
        }
        return Err(ProblemError::ControlUndetermined);
    }

    let affine = hess.iter().flatten().all(|a| !a.depends_on_any(&controls));
    if !affine {
        return Ok(ControlLaw::Implicit {
            controls,
            spec: NewtonSpec {
                max_iter: config::NEWTON_MAX_ITER,
                tol: config::NEWTON_TOL,
                warm_start: true,
                stationarity: g,
                hessian: hess,
            },
        });
    }

    // g = A u + c
    let at_zero: HashMap<String, Expr> = controls.iter().map(|u| (u.clone(), Expr::zero())).collect();
    let c: Vec<Expr> = g.iter().map(|gj| substitute(gj, &at_zero)).collect();
    let exprs = gauss_jordan(hess, c.into_iter().map(Expr::neg).collect(), &controls)?;
    Ok(ControlLaw::Closed { controls, exprs })
}

/// Solves `A u = b` symbolically. Pivots prefer nonzero constants.
fn gauss_jordan(mut a: Vec<Vec<Expr>>, mut b: Vec<Expr>, controls: &[String]) -> Result<Vec<Expr>, ProblemError> {
    let r = b.len();
    for k in 0..r {
        let candidates: Vec<usize> = (k..r).filter(|&i| !is_zero(&a[i][k])).collect();
        let pivot = candidates
            .iter()
            .copied()
            .find(|&i| a[i][k].is_const())
            .or_else(|| candidates.first().copied())
            .ok_or_else(|| ProblemError::SingularStationarity {
                control: controls[k].clone(),
                coefficients: format!(
                    "[{}]",
                    (0..r).map(|i| a[i][k].to_string()).collect::<Vec<_>>().join(", ")
                ),
            })?;
        a.swap(k, pivot);
        b.swap(k, pivot);
        let p = a[k][k].clone();
        let inv = Expr::one().divide(p);
        for j in 0..r {
            a[k][j] = simplify(a[k][j].clone().times(inv.clone()));
        }
        b[k] = simplify(b[k].clone().times(inv));
        for i in 0..r {
            if i == k || is_zero(&a[i][k]) {
                continue;
            }
            let f = a[i][k].clone();
            for j in 0..r {
                a[i][j] = simplify(a[i][j].clone().minus(f.clone().times(a[k][j].clone())));
            }
            b[i] = simplify(b[i].clone().minus(f.times(b[k].clone())));
        }
    }
    Ok(b)
}

fn simplify(e: Expr) -> Expr {
    tidy(&e)
}

/// With `psi0 = 0`, `∂H/∂u` is linear in `psi`; if its `psi`-Jacobian has rank `n`
/// at sampled points, stationarity forces `psi = 0`.
fn forces_trivial_costate(h: &Hamiltonian, g: &[Expr]) -> bool {
    let n = h.costates.len();
    if g.len() < n {
        return false;
    }
    let jac: Vec<Vec<Expr>> = g
        .iter()
        .map(|gj| h.costates.iter().map(|p| differentiate(gj, p)).collect())
        .collect();
    let mut names: Vec<String> = vec![TIME.to_string()];
    names.extend(h.states.iter().cloned());
    names.extend(h.controls.iter().cloned());
    names.extend(h.costates.iter().cloned());
    let compiled: Option<Vec<Vec<Compiled>>> = jac
        .iter()
        .map(|row| row.iter().map(|e| Compiled::new(e, &names).ok()).collect())
        .collect();
    let Some(compiled) = compiled else { return false };
    let mut rng = ChaCha8Rng::seed_from_u64(config::DEFAULT_SEED);
    let mut full_rank = 0;
    for _ in 0..8 {
        let vals: Vec<f64> = names.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = DMatrix::from_fn(g.len(), n, |i, j| compiled[i][j].eval(&vals).unwrap_or(f64::NAN));
        if m.iter().any(|v| !v.is_finite()) {
            continue;
        }
        if m.rank(config::RANK_TOL) == n {
            full_rank += 1;
        } else {
            return false;
        }
    }
    full_rank > 0
}

/// A control law compiled against a problem layout.
#[derive(Debug, Clone)]
pub struct ControlSolver {
    kind: SolverKind,
    layout: Layout,
    r: usize,
}

#[derive(Debug, Clone)]
enum SolverKind {
    Closed(Vec<Compiled>),
    Newton { g: Vec<Compiled>, hess: Vec<Vec<Compiled>>, max_iter: usize, tol: f64 },
}

impl ControlSolver {
    pub fn new(law: &ControlLaw, layout: &Layout) -> Result<ControlSolver, ProblemError> {
        let names = layout.names();
        let r = law.controls().len();
        let kind = match law {
            ControlLaw::Closed { exprs, .. } => SolverKind::Closed(
                exprs.iter().map(|e| Compiled::new(e, names)).collect::<Result<_, _>>()?,
            ),
            ControlLaw::Implicit { spec, .. } => SolverKind::Newton {
                g: spec.stationarity.iter().map(|e| Compiled::new(e, names)).collect::<Result<_, _>>()?,
                hess: spec
                    .hessian
                    .iter()
                    .map(|row| row.iter().map(|e| Compiled::new(e, names)).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?,
                max_iter: spec.max_iter,
                tol: spec.tol,
            },
        };
        Ok(ControlSolver { kind, layout: layout.clone(), r })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Fills the control slots of `point` (a full layout vector with `t`, `x`,
    /// `psi0`, `psi` already set). `guess` seeds Newton for implicit laws.
    pub fn solve(&self, point: &mut [f64], guess: &[f64]) -> Result<(), ProblemError> {
        let t = point[self.layout.t()];
        match &self.kind {
            SolverKind::Closed(exprs) => {
                let mut u = Vec::with_capacity(self.r);
                for e in exprs {
                    u.push(e.eval(point).map_err(|err| ProblemError::Newton { t, reason: err.to_string() })?);
                }
                for (j, v) in u.into_iter().enumerate() {
                    point[self.layout.u(j)] = v;
                }
                Ok(())
            }
            SolverKind::Newton { g, hess, max_iter, tol } => {
                for j in 0..self.r {
                    point[self.layout.u(j)] = guess.get(j).copied().unwrap_or(0.0);
                }
                let fail = |reason: String| ProblemError::Newton { t, reason };
                for _ in 0..*max_iter {
                    let mut res = DVector::zeros(self.r);
                    for (j, gj) in g.iter().enumerate() {
                        res[j] = gj.eval(point).map_err(|e| fail(e.to_string()))?;
                    }
                    if res.norm() <= *tol {
                        return Ok(());
                    }
                    let mut jac = DMatrix::zeros(self.r, self.r);
                    for i in 0..self.r {
                        for j in 0..self.r {
                            jac[(i, j)] = hess[i][j].eval(point).map_err(|e| fail(e.to_string()))?;
                        }
                    }
                    let step = jac
                        .lu()
                        .solve(&res)
                        .ok_or_else(|| fail("singular Hessian of H in u".into()))?;
                    let mut unorm = 0.0;
                    for j in 0..self.r {
                        let slot = self.layout.u(j);
                        point[slot] -= step[j];
                        unorm += point[slot] * point[slot];
                    }
                    if !step.iter().all(|s| s.is_finite()) {
                        return Err(fail("non-finite Newton step".into()));
                    }
                    // stagnation at the rounding floor counts as converged
                    if step.norm() <= 4.0 * f64::EPSILON * (1.0 + unorm.sqrt()) {
                        return Ok(());
                    }
                }
                Err(fail(format!("no convergence in {max_iter} iterations")))
            }
        }
    }
}

/// Sampled curvature of `H` in `u` along the control law.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub samples: usize,
    /// Largest eigenvalue of `∂²H/∂u²` seen.
    pub max_eigenvalue: f64,
    /// Points (layout order) where the Hessian had an eigenvalue above tolerance.
    pub positive: Vec<Vec<f64>>,
}

impl CurvatureReport {
    pub fn negative_semidefinite(&self) -> bool {
        self.positive.is_empty()
    }
}

/// Evaluates the eigenvalues of `∂²H/∂u²` at `samples` random points with `t, x, psi`
/// uniform in `[-2, 2]` and `u` from the law.
pub fn check_curvature<R: Rng>(
    h: &Hamiltonian,
    law: &ControlLaw,
    layout: &Layout,
    samples: usize,
    rng: &mut R,
) -> Result<CurvatureReport, ProblemError> {
    let hh = h.with_multiplier(&h.h);
    let hess = hessian(&hh, &h.controls);
    let names = layout.names();
    let compiled: Vec<Vec<Compiled>> = hess
        .iter()
        .map(|row| row.iter().map(|e| Compiled::new(e, names)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let solver = ControlSolver::new(law, layout)?;
    let r = h.controls.len();
    let n = h.states.len();
    let mut report = CurvatureReport { samples: 0, max_eigenvalue: f64::NEG_INFINITY, positive: Vec::new() };
    let mut attempts = 0;
    while report.samples < samples && attempts < 20 * samples {
        attempts += 1;
        let mut p = layout.point();
        p[layout.t()] = rng.gen_range(-2.0..2.0);
        for i in 0..n {
            p[layout.x(i)] = rng.gen_range(-2.0..2.0);
            p[layout.psi(i)] = rng.gen_range(-2.0..2.0);
        }
        p[layout.psi0()] = h.psi0;
        if solver.solve(&mut p, &vec![0.0; r]).is_err() {
            continue;
        }
        let m = DMatrix::from_fn(r, r, |i, j| compiled[i][j].eval(&p).unwrap_or(f64::NAN));
        if m.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let sym = (&m + m.transpose()) * 0.5;
        let top = SymmetricEigen::new(sym).eigenvalues.max();
        report.samples += 1;
        report.max_eigenvalue = report.max_eigenvalue.max(top);
        if top > config::CURVATURE_TOL {
            report.positive.push(p);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{hamiltonian, Problem, ProblemSpec};
    use crate::symbolic::{parse, zero_test};

    fn problem(states: &[&str], controls: &[&str], l: &str, f: &[&str], psi0: f64) -> Problem {
        Problem::new(ProblemSpec {
            name: "t".into(),
            states: states.iter().map(|s| s.to_string()).collect(),
            controls: controls.iter().map(|s| s.to_string()).collect(),
            lagrangian: parse(l).unwrap(),
            dynamics: f.iter().map(|s| parse(s).unwrap()).collect(),
            t0: 0.0,
            t1: 1.0,
            x_t0: vec![None; states.len()],
            x_t1: vec![None; states.len()],
            psi0,
        })
        .unwrap()
    }

    fn closed(p: &Problem) -> Vec<Expr> {
        match eliminate_control(&hamiltonian(p)).unwrap() {
            ControlLaw::Closed { exprs, .. } => exprs,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_law() {
        let p = problem(&["x1"], &["u1"], "u1^2", &["u1"], -1.0);
        assert_eq!(closed(&p), vec![parse("psi1/2").unwrap()]);
    }

    #[test]
    fn multiplicative_law() {
        let p = problem(&["x1"], &["u1"], "u1^2", &["u1*x1"], -1.0);
        assert_eq!(closed(&p), vec![parse("psi1*x1/2").unwrap()]);
    }

    #[test]
    fn two_controls_coupled() {
        let p = problem(&["x1", "x2"], &["u1", "u2"], "u1^2 + u1*u2 + u2^2", &["u1", "u2"], -1.0);
        let h = hamiltonian(&p);
        let law = eliminate_control(&h).unwrap();
        let a = law.assignments().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in &h.dh_du {
            let r = substitute(&h.with_multiplier(g), &a);
            assert!(zero_test(&r, &mut rng).is_zero(), "{r}");
        }
    }

    #[test]
    fn quartic_is_implicit_and_solvable() {
        let p = problem(&["x1"], &["u1"], "u1^4 + u1^2", &["u1"], -1.0);
        let h = hamiltonian(&p);
        let law = eliminate_control(&h).unwrap();
        assert!(!law.is_closed());
        let layout = p.layout();
        let solver = ControlSolver::new(&law, &layout).unwrap();
        let mut pt = layout.point();
        pt[layout.psi0()] = -1.0;
        pt[layout.psi(0)] = 6.0; // 4u^3 + 2u = 6 at u = 1
        solver.solve(&mut pt, &[0.0]).unwrap();
        assert!((pt[layout.u(0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn abnormal_basic_problem_is_trivial() {
        let p = problem(&["x1"], &["u1"], "u1^2", &["u1"], 0.0);
        assert!(matches!(eliminate_control(&hamiltonian(&p)), Err(ProblemError::TrivialMultiplier)));
    }

    #[test]
    fn linear_in_control_is_undetermined() {
        let p = problem(&["x1"], &["u1"], "x1^2", &["u1"], -1.0);
        assert!(matches!(eliminate_control(&hamiltonian(&p)), Err(ProblemError::ControlUndetermined)));
    }

    #[test]
    fn singular_system_names_the_coefficient() {
        // H depends on u1 + u2 only: A = [[-2,-2],[-2,-2]]
        let p = problem(&["x1"], &["u1", "u2"], "(u1 + u2)^2", &["u1 + u2"], -1.0);
        match eliminate_control(&hamiltonian(&p)) {
            Err(ProblemError::SingularStationarity { control, .. }) => assert_eq!(control, "u2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_problem_law() {
        let p = problem(&["x1"], &["u1"], "0", &["0"], -1.0);
        assert_eq!(closed(&p), vec![Expr::zero()]);
    }

    #[test]
    fn quadratic_curvature_is_negative() {
        let p = problem(&["x1"], &["u1"], "u1^2", &["u1"], -1.0);
        let h = hamiltonian(&p);
        let law = eliminate_control(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = check_curvature(&h, &law, &p.layout(), 20, &mut rng).unwrap();
        assert_eq!(rep.samples, 20);
        assert!(rep.negative_semidefinite());
        assert_eq!(rep.max_eigenvalue, -2.0);
    }

    #[test]
    fn concave_lagrangian_flags_positive_curvature() {
        let p = problem(&["x1"], &["u1"], "0 - u1^2", &["u1"], -1.0);
        let h = hamiltonian(&p);
        let law = eliminate_control(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = check_curvature(&h, &law, &p.layout(), 20, &mut rng).unwrap();
        assert_eq!(rep.positive.len(), 20, "{rep:?}");
    }
}

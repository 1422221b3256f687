use crate::config;
use crate::problem::{eliminate_control, hamiltonian, ControlLaw, ControlSolver, Hamiltonian, Layout, Problem, ProblemError};
use crate::symbolic::Compiled;

use super::{ExtremalError, Trajectory};

const BLOW_UP: f64 = 1e100;

/// Right-hand side of the canonical system at one point.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub u: Vec<f64>,
    /// `x' = ∂H/∂ψ`
    pub dx: Vec<f64>,
    /// `ψ' = -∂H/∂x`
    pub dpsi: Vec<f64>,
    pub lagrangian: f64,
    pub h: f64,
}

/// The canonical system of a problem, compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CanonicalSystem {
    problem: Problem,
    hamiltonian: Hamiltonian,
    law: ControlLaw,
    layout: Layout,
    solver: ControlSolver,
    dh_dpsi: Vec<Compiled>,
    dh_dx: Vec<Compiled>,
    lagrangian: Compiled,
    h: Compiled,
}

impl CanonicalSystem {
    pub fn new(p: &Problem) -> Result<CanonicalSystem, ProblemError> {
        let h = hamiltonian(p);
        let law = eliminate_control(&h)?;
        CanonicalSystem::with_law(p, h, law)
    }

    pub fn with_law(p: &Problem, h: Hamiltonian, law: ControlLaw) -> Result<CanonicalSystem, ProblemError> {
        let layout = p.layout();
        let names = layout.names();
        let compile = |e| Compiled::new(e, names);
        Ok(CanonicalSystem {
            solver: ControlSolver::new(&law, &layout)?,
            dh_dpsi: h.dh_dpsi.iter().map(compile).collect::<Result<_, _>>()?,
            dh_dx: h.dh_dx.iter().map(compile).collect::<Result<_, _>>()?,
            lagrangian: compile(p.lagrangian())?,
            h: compile(&h.h)?,
            problem: p.clone(),
            hamiltonian: h,
            law,
            layout,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn point(&self, t: f64, x: &[f64], psi: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut p = l.point();
        p[l.t()] = t;
        for i in 0..x.len() {
            p[l.x(i)] = x[i];
            p[l.psi(i)] = psi[i];
        }
        p[l.psi0()] = self.problem.psi0();
        p
    }

    /// Evaluates the closed system at `(t, x, ψ)`; `guess` warm-starts implicit laws.
    pub fn eval(&self, t: f64, x: &[f64], psi: &[f64], guess: &[f64]) -> Result<NodeState, ProblemError> {
        let l = &self.layout;
        let mut p = self.point(t, x, psi);
        self.solver.solve(&mut p, guess)?;
        let wrap = |e: crate::symbolic::SymbolicError| ProblemError::Newton { t, reason: e.to_string() };
        let n = x.len();
        let mut dx = Vec::with_capacity(n);
        let mut dpsi = Vec::with_capacity(n);
        for i in 0..n {
            dx.push(self.dh_dpsi[i].eval(&p).map_err(wrap)?);
            dpsi.push(-self.dh_dx[i].eval(&p).map_err(wrap)?);
        }
        Ok(NodeState {
            u: (0..self.problem.r()).map(|j| p[l.u(j)]).collect(),
            dx,
            dpsi,
            lagrangian: self.lagrangian.eval(&p).map_err(wrap)?,
            h: self.h.eval(&p).map_err(wrap)?,
        })
    }

    /// Classical RK4 on a uniform grid of `steps` intervals. The cost is integrated
    /// as an extra state, which for a pure quadrature reduces to Simpson's rule.
    pub fn integrate(&self, x_a: &[f64], psi_a: &[f64], steps: usize) -> Result<Trajectory, ExtremalError> {
        let n = self.problem.n();
        if steps < config::MIN_STEPS {
            return Err(ExtremalError::Steps { min: config::MIN_STEPS, got: steps });
        }
        for (what, v) in [("x(a)", x_a), ("psi(a)", psi_a)] {
            if v.len() != n {
                return Err(ExtremalError::Dimension { what: what.into(), expected: n, got: v.len() });
            }
        }
        let (a, b) = self.problem.horizon();
        let dt = (b - a) / steps as f64;
        let mut traj = Trajectory::empty(&self.problem);

        let mut x = x_a.to_vec();
        let mut psi = psi_a.to_vec();
        let mut cost = 0.0;
        let mut guess = vec![0.0; self.problem.r()];
        let stage = |t: f64, x: &[f64], psi: &[f64], guess: &mut Vec<f64>| -> Result<NodeState, ExtremalError> {
            let s = self.eval(t, x, psi, guess).map_err(|e| {
                // overflow of an escaping state surfaces as a domain error
                if x.iter().chain(psi).any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
                    ExtremalError::BlowUp { t }
                } else {
                    ExtremalError::Problem(e)
                }
            })?;
            guess.clone_from(&s.u);
            if s.dx.iter().chain(&s.dpsi).any(|v| !v.is_finite()) || !s.lagrangian.is_finite() {
                return Err(ExtremalError::BlowUp { t });
            }
            Ok(s)
        };

        for k in 0..=steps {
            let t = if k == steps { b } else { a + k as f64 * dt };
            let k1 = stage(t, &x, &psi, &mut guess)?;
            traj.push(t, &x, &psi, &k1.u, k1.h);
            if k == steps {
                break;
            }
            let shift = |base: &[f64], d: &[f64], c: f64| -> Vec<f64> {
                base.iter().zip(d).map(|(y, dy)| y + c * dy).collect()
            };
            let k2 = stage(t + dt / 2.0, &shift(&x, &k1.dx, dt / 2.0), &shift(&psi, &k1.dpsi, dt / 2.0), &mut guess)?;
            let k3 = stage(t + dt / 2.0, &shift(&x, &k2.dx, dt / 2.0), &shift(&psi, &k2.dpsi, dt / 2.0), &mut guess)?;
            let k4 = stage(t + dt, &shift(&x, &k3.dx, dt), &shift(&psi, &k3.dpsi, dt), &mut guess)?;
            for i in 0..n {
                x[i] += dt / 6.0 * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
                psi[i] += dt / 6.0 * (k1.dpsi[i] + 2.0 * k2.dpsi[i] + 2.0 * k3.dpsi[i] + k4.dpsi[i]);
            }
            cost += dt / 6.0 * (k1.lagrangian + 2.0 * k2.lagrangian + 2.0 * k3.lagrangian + k4.lagrangian);
            if x.iter().chain(&psi).any(|v| !v.is_finite()) || !cost.is_finite() {
                return Err(ExtremalError::BlowUp { t: t + dt });
            }
            // restart Newton from the last accepted node
            guess.clone_from(&k1.u);
        }
        traj.cost = cost;
        Ok(traj)
    }
}

/// Integrates the canonical system of `p` from `(x_a, ψ_a)`.
pub fn integrate(p: &Problem, x_a: &[f64], psi_a: &[f64], steps: usize) -> Result<Trajectory, ExtremalError> {
    CanonicalSystem::new(p)?.integrate(x_a, psi_a, steps)
}

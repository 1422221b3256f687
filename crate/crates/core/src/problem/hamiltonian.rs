use crate::symbolic::{differentiate, Expr};

use super::{Problem, PSI0, TIME};

/// `H = psi0*L + Σ psi_i*φ_i` with its partial derivatives.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub h: Expr,
    pub dh_dpsi: Vec<Expr>,
    pub dh_dx: Vec<Expr>,
    pub dh_du: Vec<Expr>,
    pub dh_dt: Expr,
    pub psi0: f64,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub costates: Vec<String>,
}

pub fn hamiltonian(p: &Problem) -> Hamiltonian {
    let costates = p.costates();
    let mut terms = vec![Expr::var(PSI0).times(p.lagrangian().clone())];
    for (psi, f) in costates.iter().zip(p.dynamics()) {
        terms.push(Expr::var(psi.clone()).times(f.clone()));
    }
    let h = Expr::sum(terms);
    let dh_dpsi = costates.iter().map(|v| differentiate(&h, v)).collect();
    let dh_dx = p.states().iter().map(|v| differentiate(&h, v)).collect();
    let dh_du = p.controls().iter().map(|v| differentiate(&h, v)).collect();
    let dh_dt = differentiate(&h, TIME);
    Hamiltonian {
        h,
        dh_dpsi,
        dh_dx,
        dh_du,
        dh_dt,
        psi0: p.psi0(),
        states: p.states().to_vec(),
        controls: p.controls().to_vec(),
        costates,
    }
}

impl Hamiltonian {
    /// `H` with the numeric multiplier substituted for `psi0`.
    pub fn with_multiplier(&self, e: &Expr) -> Expr {
        crate::symbolic::substitute_values(e, &[(PSI0, self.psi0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use crate::symbolic::parse;

    fn problem(l: &str, f: &str) -> Problem {
        Problem::new(ProblemSpec {
            name: "t".into(),
            states: vec!["x1".into()],
            controls: vec!["u1".into()],
            lagrangian: parse(l).unwrap(),
            dynamics: vec![parse(f).unwrap()],
            t0: 0.0,
            t1: 1.0,
            x_t0: vec![None],
            x_t1: vec![None],
            psi0: -1.0,
        })
        .unwrap()
    }

    #[test]
    fn quadratic() {
        let h = hamiltonian(&problem("u1^2", "u1"));
        assert_eq!(h.h, parse("psi0*u1^2 + psi1*u1").unwrap());
        assert_eq!(h.dh_du, vec![parse("2*psi0*u1 + psi1").unwrap()]);
        assert_eq!(h.dh_dpsi, vec![parse("u1").unwrap()]);
        assert!(h.dh_dx[0].is_zero());
    }

    #[test]
    fn multiplicative_dynamics() {
        let h = hamiltonian(&problem("u1^2", "u1*x1"));
        assert_eq!(h.h, parse("psi0*u1^2 + psi1*u1*x1").unwrap());
    }

    #[test]
    fn zero_problem() {
        let h = hamiltonian(&problem("0", "0"));
        assert!(h.h.is_zero());
        assert!(h.dh_dt.is_zero());
    }
}

//! Quasi-invariance of a problem under a parameter family of transformations, checked
//! to first order in the parameters, and the conserved quantities it yields.
//!
//! For parameter `s_k` write `η_t, η_x, ζ, Φ'` for the `s_k`-derivatives at `s = 0` of
//! `h_t, h_x, u_s, Φ`, and `D_t = ∂/∂t + φ·∂/∂x` with `u` held fixed. The identities are
//!
//! ```text
//! (i)  L_t η_t + L_x·η_x + L_u·ζ + L D_t(η_t) - D_t(Φ') = 0
//! (ii) D_t(η_x,i) - φ_i D_t(η_t) - (φ_i,t η_t + φ_i,x·η_x + φ_i,u·ζ) = 0
//! ```
//!
//! and when both hold `C_k = ψ·η_x + ψ₀ Φ' - H η_t` is constant along extremals.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config;
use crate::conservation::{monitor, Drift, Mode};
use crate::extremal::Trajectory;
use crate::problem::{costate_name, Problem, HAMILTONIAN, PSI0, TIME};
use crate::sections::{parse_sections, SectionError};
use crate::symbolic::{
    differentiate, evaluate, parse, substitute, symbolically_zero, tidy, zero_test, Bindings, Compiled, Expr, Func,
    SymbolicError, ZeroVerdict,
};

#[derive(Debug, Error)]
pub enum NoetherError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] SectionError),
    #[error("line {line}: {source}")]
    Expression { line: usize, source: SymbolicError },
    #[error("missing {0}")]
    Missing(String),
    #[error("invalid parameter name '{0}'")]
    InvalidParam(String),
    #[error("identity at s = 0 fails for {component}: reduces to {found}, expected {expected}")]
    Identity { component: String, found: String, expected: String },
    #[error("unknown variable '{name}' in {context}")]
    UnknownVariable { name: String, context: String },
    #[error("family does not match the problem: {0}")]
    Mismatch(String),
    #[error("numeric verification of parameter {param} needs an extremal; supply a trajectory or complete boundary data")]
    MissingExtremal { param: String },
    #[error("finite-difference check needs a uniform grid with at least 5 nodes")]
    Grid,
    #[error("evaluation failed at t = {t}: {reason}")]
    Evaluation { t: f64, reason: String },
}

/// `(h_t, h_x, u_s, Φ)` as expressions in `(t, x, u, s)`.
#[derive(Debug, Clone)]
pub struct TransformationFamily {
    pub params: Vec<String>,
    pub h_t: Option<Expr>,
    /// State name to image; states not listed map to themselves.
    pub h_x: BTreeMap<String, Expr>,
    /// Control name to image; controls not listed map to themselves.
    pub u_s: BTreeMap<String, Expr>,
    pub phi: Option<Expr>,
    pub warnings: Vec<String>,
}

fn reserved(name: &str) -> bool {
    name == TIME
        || name == HAMILTONIAN
        || name == PSI0
        || Func::from_name(name).is_some()
        || name.strip_prefix("psi").is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
}

fn expr_at(value: &str, line: usize) -> Result<Expr, NoetherError> {
    parse(value).map_err(|source| NoetherError::Expression { line, source })
}

fn same(a: &Expr, b: &Expr) -> bool {
    a == b || symbolically_zero(&a.clone().minus(b.clone()))
}

impl TransformationFamily {
    pub fn load(path: impl AsRef<Path>) -> Result<TransformationFamily, NoetherError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| NoetherError::Io { path: path.display().to_string(), source })?;
        TransformationFamily::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<TransformationFamily, NoetherError> {
        let file = parse_sections(text)?;
        let head = file.section("family").ok_or_else(|| NoetherError::Missing("[family] section".into()))?;
        let params_entry = head.get("params").ok_or_else(|| NoetherError::Missing("key 'params' in [family]".into()))?;
        let params: Vec<String> = params_entry
            .value
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if params.is_empty() {
            return Err(NoetherError::Missing("at least one parameter".into()));
        }
        for s in &params {
            let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok || reserved(s) || params.iter().filter(|q| *q == s).count() > 1 {
                return Err(NoetherError::InvalidParam(s.clone()));
            }
        }
        let h_t = head.get("h_t").map(|e| expr_at(&e.value, e.line)).transpose()?;
        let mut h_x = BTreeMap::new();
        if let Some(sec) = file.section("h_x") {
            for e in &sec.entries {
                h_x.insert(e.key.clone(), expr_at(&e.value, e.line)?);
            }
        }
        let mut u_s = BTreeMap::new();
        if let Some(sec) = file.section("u_s") {
            for e in &sec.entries {
                u_s.insert(e.key.clone(), expr_at(&e.value, e.line)?);
            }
        }
        let phi = match file.section("phi") {
            Some(sec) => {
                let e = sec.get("Phi").ok_or_else(|| NoetherError::Missing("key 'Phi' in [phi]".into()))?;
                Some(expr_at(&e.value, e.line)?)
            }
            None => None,
        };
        for key in h_x.keys().chain(u_s.keys()) {
            if params.contains(key) || reserved(key) {
                return Err(NoetherError::InvalidParam(key.clone()));
            }
        }
        let fam = TransformationFamily { params, h_t, h_x, u_s, phi, warnings: Vec::new() };
        fam.validate()
    }

    fn zero_params(&self) -> HashMap<String, Expr> {
        self.params.iter().map(|s| (s.clone(), Expr::zero())).collect()
    }

    fn validate(mut self) -> Result<TransformationFamily, NoetherError> {
        let mut known: Vec<String> = vec![TIME.into()];
        known.extend(self.params.iter().cloned());
        known.extend(self.h_x.keys().cloned());
        known.extend(self.u_s.keys().cloned());
        let mut all: Vec<(String, &Expr)> = Vec::new();
        if let Some(e) = &self.h_t {
            all.push(("h_t".into(), e));
        }
        for (k, e) in &self.h_x {
            all.push((format!("h_x {k}"), e));
        }
        for (k, e) in &self.u_s {
            all.push((format!("u_s {k}"), e));
        }
        if let Some(e) = &self.phi {
            all.push(("Phi".into(), e));
        }
        for (context, e) in &all {
            if let Some(v) = e.free_vars().into_iter().find(|v| !known.contains(v)) {
                return Err(NoetherError::UnknownVariable { name: v, context: context.clone() });
            }
        }

        let zero = self.zero_params();
        let check = |component: String, e: &Expr, expected: Expr| -> Result<(), NoetherError> {
            let at0 = substitute(e, &zero);
            if same(&at0, &expected) {
                Ok(())
            } else {
                Err(NoetherError::Identity { component, found: at0.to_string(), expected: expected.to_string() })
            }
        };
        if let Some(e) = &self.h_t {
            check("h_t".into(), e, Expr::var(TIME))?;
        }
        for (k, e) in &self.h_x {
            check(format!("h_x {k}"), e, Expr::var(k.clone()))?;
        }
        for (k, e) in &self.u_s {
            check(format!("u_s {k}"), e, Expr::var(k.clone()))?;
        }
        if let Some(e) = &self.phi {
            let at0 = substitute(e, &zero);
            match at0.as_const() {
                Some(0.0) => {}
                Some(c) => self.warnings.push(format!("Phi at s = 0 is the constant {c}, not 0; only its s-derivative is used")),
                None => {
                    return Err(NoetherError::Identity {
                        component: "Phi".into(),
                        found: at0.to_string(),
                        expected: "a constant".into(),
                    })
                }
            }
        }
        Ok(self)
    }

    pub fn rho(&self) -> usize {
        self.params.len()
    }

    /// The time transformation depends on state or control.
    pub fn h_t_depends_on_state<S: AsRef<str>>(&self, names: &[S]) -> bool {
        self.h_t.as_ref().is_some_and(|e| e.depends_on_any(names))
    }

    fn check_against(&self, p: &Problem) -> Result<(), NoetherError> {
        for k in self.h_x.keys() {
            if !p.states().contains(k) {
                return Err(NoetherError::Mismatch(format!("[h_x] names '{k}', which is not a state")));
            }
        }
        for k in self.u_s.keys() {
            if !p.controls().contains(k) {
                return Err(NoetherError::Mismatch(format!("[u_s] names '{k}', which is not a control")));
            }
        }
        Ok(())
    }

    fn h_x_of(&self, x: &str) -> Expr {
        self.h_x.get(x).cloned().unwrap_or_else(|| Expr::var(x))
    }

    fn u_s_of(&self, u: &str) -> Expr {
        self.u_s.get(u).cloned().unwrap_or_else(|| Expr::var(u))
    }

    fn h_t_expr(&self) -> Expr {
        self.h_t.clone().unwrap_or_else(|| Expr::var(TIME))
    }

    fn phi_expr(&self) -> Expr {
        self.phi.clone().unwrap_or_else(Expr::zero)
    }
}

pub fn load_family(path: impl AsRef<Path>) -> Result<TransformationFamily, NoetherError> {
    TransformationFamily::load(path)
}

/// First-order generators of parameter `k`.
struct Generators {
    eta_t: Expr,
    eta_x: Vec<Expr>,
    zeta: Vec<Expr>,
    phi: Expr,
}

fn generators(p: &Problem, f: &TransformationFamily, k: usize) -> Generators {
    let s = &f.params[k];
    let zero = f.zero_params();
    let d0 = |e: &Expr| substitute(&differentiate(e, s), &zero);
    Generators {
        eta_t: d0(&f.h_t_expr()),
        eta_x: p.states().iter().map(|x| d0(&f.h_x_of(x))).collect(),
        zeta: p.controls().iter().map(|u| d0(&f.u_s_of(u))).collect(),
        phi: d0(&f.phi_expr()),
    }
}

/// `D_t = ∂/∂t + φ·∂/∂x`, control held fixed.
fn total_derivative(p: &Problem, e: &Expr) -> Expr {
    let mut terms = vec![differentiate(e, TIME)];
    for (x, f) in p.states().iter().zip(p.dynamics()) {
        terms.push(f.clone().times(differentiate(e, x)));
    }
    Expr::sum(terms)
}

fn first_variation(p: &Problem, e: &Expr, g: &Generators) -> Expr {
    let mut terms = vec![differentiate(e, TIME).times(g.eta_t.clone())];
    for (x, eta) in p.states().iter().zip(&g.eta_x) {
        terms.push(differentiate(e, x).times(eta.clone()));
    }
    for (u, z) in p.controls().iter().zip(&g.zeta) {
        terms.push(differentiate(e, u).times(z.clone()));
    }
    Expr::sum(terms)
}

/// Residual of identity (i) for parameter `k`.
pub fn lagrangian_identity(p: &Problem, f: &TransformationFamily, k: usize) -> Expr {
    let g = generators(p, f, k);
    let l = p.lagrangian();
    Expr::sum(vec![
        first_variation(p, l, &g),
        l.clone().times(total_derivative(p, &g.eta_t)),
        total_derivative(p, &g.phi).neg(),
    ])
}

/// Residuals of identity (ii) for parameter `k`, one per state.
pub fn dynamics_identity(p: &Problem, f: &TransformationFamily, k: usize) -> Vec<Expr> {
    let g = generators(p, f, k);
    let dt_eta_t = total_derivative(p, &g.eta_t);
    p.states()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let phi_i = &p.dynamics()[i];
            Expr::sum(vec![
                total_derivative(p, &g.eta_x[i]),
                phi_i.clone().times(dt_eta_t.clone()).neg(),
                first_variation(p, phi_i, &g).neg(),
            ])
        })
        .collect()
}

/// `Σ psi_i η_x,i + psi0 Φ' - H η_t`, with `H` and `psi0` left symbolic.
pub fn conserved_quantity(p: &Problem, f: &TransformationFamily, k: usize) -> Expr {
    let g = generators(p, f, k);
    let mut terms: Vec<Expr> = g
        .eta_x
        .iter()
        .enumerate()
        .map(|(i, eta)| Expr::var(costate_name(i)).times(eta.clone()))
        .collect();
    terms.push(Expr::var(PSI0).times(g.phi.clone()));
    terms.push(Expr::var(HAMILTONIAN).times(g.eta_t).neg());
    Expr::sum(terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityVerdict {
    pub mode: Mode,
    #[serde(serialize_with = "crate::report::as_strings")]
    pub residuals: Vec<Expr>,
    pub witness: Option<BTreeMap<String, f64>>,
    pub witness_value: Option<f64>,
    /// Largest `s`-derivative seen along the extremal, relative to the scale used.
    pub fd_max: Option<f64>,
    pub fd_passed: Option<bool>,
}

impl IdentityVerdict {
    pub fn passed(&self) -> bool {
        self.mode != Mode::Violated && self.fd_passed != Some(false)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterReport {
    pub param: String,
    pub lagrangian: IdentityVerdict,
    pub dynamics: IdentityVerdict,
    #[serde(serialize_with = "crate::report::as_optional_string")]
    pub conserved: Option<Expr>,
    pub drift: Option<Drift>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    /// Always "first order": only `s`-derivatives at 0 are checked.
    pub order: &'static str,
    pub parameters: Vec<ParameterReport>,
    pub warnings: Vec<String>,
}

fn zero_tier<R: Rng>(residuals: &[Expr], rng: &mut R) -> (Mode, Option<(Bindings, f64)>) {
    if residuals.iter().all(symbolically_zero) {
        return (Mode::SymbolicZero, None);
    }
    let mut worst: Option<(Bindings, f64)> = None;
    for r in residuals {
        match zero_test(r, rng) {
            ZeroVerdict::Symbolic | ZeroVerdict::Numeric => {}
            ZeroVerdict::NonZero { witness } => {
                if let Some((b, v)) = witness {
                    if worst.as_ref().is_none_or(|(_, w)| v.abs() > w.abs()) {
                        worst = Some((b, v));
                    }
                }
            }
        }
    }
    match worst {
        Some(w) if w.1.abs() > config::VIOLATION_WITNESS_MIN => (Mode::Violated, Some(w)),
        // below the witness threshold: leave it to the along-extremal check
        Some(w) => (Mode::NumericZero, Some(w)),
        None => (Mode::NumericZero, None),
    }
}

/// Checks both identities for every parameter. Numeric verdicts are confirmed by
/// finite differences in `s` along `extremal`, which is then required.
pub fn check_quasi_invariance<R: Rng>(
    p: &Problem,
    f: &TransformationFamily,
    extremal: Option<&Trajectory>,
    rng: &mut R,
) -> Result<InvarianceReport, NoetherError> {
    f.check_against(p)?;
    let mut warnings = f.warnings.clone();
    let mut names: Vec<String> = p.states().to_vec();
    names.extend(p.controls().iter().cloned());
    let ht_general = f.h_t_depends_on_state(&names);
    if ht_general {
        warnings.push(
            "h_t depends on state or control: the first-order boundary term is ambiguous, so numeric verification along an extremal is skipped"
                .into(),
        );
    }
    let u_dependent = f.h_x.values().chain(f.phi.iter()).chain(f.h_t.iter()).any(|e| e.depends_on_any(p.controls()));
    if u_dependent {
        warnings.push("the family depends on u: the symbolic identities hold u fixed and ignore u' terms".into());
    }

    let mut parameters = Vec::new();
    for k in 0..f.rho() {
        let mut build = |residuals: Vec<Expr>| {
            let (mode, w) = zero_tier(&residuals, rng);
            IdentityVerdict {
                mode,
                residuals,
                witness_value: w.as_ref().map(|(_, v)| *v),
                witness: w.map(|(b, _)| b.into_iter().collect()),
                fd_max: None,
                fd_passed: None,
            }
        };
        let mut lag = build(vec![tidy(&lagrangian_identity(p, f, k))]);
        let mut dynv = build(dynamics_identity(p, f, k).iter().map(tidy).collect());

        let needs_fd = [&lag, &dynv].iter().any(|v| v.mode == Mode::NumericZero);
        if needs_fd && !ht_general {
            let tr = extremal.ok_or_else(|| NoetherError::MissingExtremal { param: f.params[k].clone() })?;
            let (a, b) = fd_check(p, f, k, tr)?;
            if lag.mode == Mode::NumericZero {
                lag.fd_max = Some(a);
                lag.fd_passed = Some(a <= config::NOETHER_FD_TOL);
            }
            if dynv.mode == Mode::NumericZero {
                dynv.fd_max = Some(b);
                dynv.fd_passed = Some(b <= config::NOETHER_FD_TOL);
            }
        }

        let conserved = (lag.passed() && dynv.passed()).then(|| conserved_quantity(p, f, k));
        let drift = match (&conserved, extremal) {
            (Some(c), Some(tr)) => Some(monitor(c, tr).map_err(|e| NoetherError::Evaluation { t: f64::NAN, reason: e.to_string() })?),
            _ => None,
        };
        parameters.push(ParameterReport { param: f.params[k].clone(), lagrangian: lag, dynamics: dynv, conserved, drift });
    }
    Ok(InvarianceReport { order: "first order", parameters, warnings })
}

/// Fourth-order central difference in time at interior node `j`.
fn d_dt(v: &[f64], j: usize, h: f64) -> f64 {
    (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h)
}

/// Maximum relative `s`-derivatives of the two integrand identities along `tr`:
///
/// ```text
/// A(s) = L(h_t, h_x, u_s) d(h_t)/dt - dΦ/dt
/// B(s) = d(h_x)/dt - φ(h_t, h_x, u_s) d(h_t)/dt
/// ```
///
/// with time derivatives taken along the trajectory, so `u'` terms are included.
fn fd_check(p: &Problem, f: &TransformationFamily, k: usize, tr: &Trajectory) -> Result<(f64, f64), NoetherError> {
    let m = tr.len();
    if m < 5 {
        return Err(NoetherError::Grid);
    }
    let h = (tr.grid[m - 1] - tr.grid[0]) / (m - 1) as f64;
    if tr.grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(NoetherError::Grid);
    }
    let (n, r) = (p.n(), p.r());
    let mut layout: Vec<String> = vec![TIME.into()];
    layout.extend(p.states().iter().cloned());
    layout.extend(p.controls().iter().cloned());
    layout.extend(f.params.iter().cloned());
    let comp = |e: &Expr| Compiled::new(e, &layout).map_err(|e| NoetherError::Evaluation { t: f64::NAN, reason: e.to_string() });
    let ht = comp(&f.h_t_expr())?;
    let hx: Vec<Compiled> = p.states().iter().map(|x| comp(&f.h_x_of(x))).collect::<Result<_, _>>()?;
    let us: Vec<Compiled> = p.controls().iter().map(|u| comp(&f.u_s_of(u))).collect::<Result<_, _>>()?;
    let phi = comp(&f.phi_expr())?;
    // L and φ as functions of the transformed (t, x, u)
    let base: Vec<String> = layout[..1 + n + r].to_vec();
    let l = Compiled::new(p.lagrangian(), &base).map_err(|e| NoetherError::Evaluation { t: f64::NAN, reason: e.to_string() })?;
    let dyn_c: Vec<Compiled> = p
        .dynamics()
        .iter()
        .map(|e| Compiled::new(e, &base))
        .collect::<Result<_, _>>()
        .map_err(|e| NoetherError::Evaluation { t: f64::NAN, reason: e.to_string() })?;

    let eps = config::NOETHER_FD_STEP;
    // integrands at s_k = sigma for every node; returns (A, B) on interior nodes
    let integrands = |sigma: f64| -> Result<(Vec<f64>, Vec<Vec<f64>>), NoetherError> {
        let mut tv = Vec::with_capacity(m);
        let mut xv = vec![Vec::with_capacity(m); n];
        let mut uv = vec![Vec::with_capacity(m); r];
        let mut pv = Vec::with_capacity(m);
        for j in 0..m {
            let mut pt = vec![tr.grid[j]];
            pt.extend(&tr.x[j]);
            pt.extend(&tr.u[j]);
            pt.extend((0..f.rho()).map(|q| if q == k { sigma } else { 0.0 }));
            let err = |e: SymbolicError| NoetherError::Evaluation { t: tr.grid[j], reason: e.to_string() };
            tv.push(ht.eval(&pt).map_err(err)?);
            for i in 0..n {
                xv[i].push(hx[i].eval(&pt).map_err(err)?);
            }
            for i in 0..r {
                uv[i].push(us[i].eval(&pt).map_err(err)?);
            }
            pv.push(phi.eval(&pt).map_err(err)?);
        }
        let mut a = Vec::new();
        let mut b = vec![Vec::new(); n];
        for j in 2..m - 2 {
            let mut q = vec![tv[j]];
            q.extend((0..n).map(|i| xv[i][j]));
            q.extend((0..r).map(|i| uv[i][j]));
            let err = |e: SymbolicError| NoetherError::Evaluation { t: tr.grid[j], reason: e.to_string() };
            let dtt = d_dt(&tv, j, h);
            a.push(l.eval(&q).map_err(err)? * dtt - d_dt(&pv, j, h));
            for i in 0..n {
                b[i].push(d_dt(&xv[i], j, h) - dyn_c[i].eval(&q).map_err(err)? * dtt);
            }
        }
        Ok((a, b))
    };
    let (a0, _) = integrands(0.0)?;
    let (ap, bp) = integrands(eps)?;
    let (am, bm) = integrands(-eps)?;
    let scale_a = 1.0 + a0.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let da = ap.iter().zip(&am).fold(0.0f64, |s, (p, q)| s.max(((p - q) / (2.0 * eps)).abs()));
    // B(0) is ~0; scale by the state velocity instead
    let mut scale_b = 1.0f64;
    let mut db = 0.0f64;
    for i in 0..n {
        for j in 2..m - 2 {
            scale_b = scale_b.max(d_dt(&tr.x.iter().map(|x| x[i]).collect::<Vec<_>>(), j, h).abs());
        }
        for (p, q) in bp[i].iter().zip(&bm[i]) {
            db = db.max(((p - q) / (2.0 * eps)).abs());
        }
    }
    Ok((da / scale_a, db / scale_b))
}

/// Evaluates `C` at a set of bindings, resolving `H` from the problem.
pub fn evaluate_quantity(p: &Problem, c: &Expr, b: &Bindings) -> Result<f64, SymbolicError> {
    let h = crate::problem::hamiltonian(p).h;
    let full = substitute(c, &HashMap::from([(HAMILTONIAN.to_string(), h)]));
    evaluate(&full, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad() -> Problem {
        Problem::from_text("[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2\"\n[dynamics]\nx1=\"u1\"\n[boundary]\nx1_t0=0\nx1_t1=1\n").unwrap()
    }

    const SHIFT: &str = "[family]\nparams = s1\n[h_x]\nx1 = \"x1 + s1*t\"\n[u_s]\nu1 = \"u1 + s1\"\n[phi]\nPhi = \"s1^2*t + 2*s1*x1\"\n";

    #[test]
    fn shift_family_loads() {
        let f = TransformationFamily::from_text(SHIFT).unwrap();
        assert_eq!(f.rho(), 1);
    }

    #[test]
    fn exponential_scaling_loads() {
        let f = TransformationFamily::from_text(
            "[family]\nparams=s1\n[h_x]\nx1=\"exp(s1)*x1\"\nx2=\"exp(s1)*x2\"\n",
        )
        .unwrap();
        assert_eq!(f.h_x.len(), 2);
    }

    #[test]
    fn identity_violation_is_named() {
        match TransformationFamily::from_text("[family]\nparams=s1\n[h_x]\nx1=\"x1 + 1\"\n") {
            Err(NoetherError::Identity { component, .. }) => assert_eq!(component, "h_x x1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shift_quantity() {
        let p = quad();
        let f = TransformationFamily::from_text(SHIFT).unwrap();
        let rep = check_quasi_invariance(&p, &f, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let pr = &rep.parameters[0];
        assert_eq!(pr.lagrangian.mode, Mode::SymbolicZero);
        assert_eq!(pr.dynamics.mode, Mode::SymbolicZero);
        assert_eq!(pr.conserved.as_ref().unwrap(), &parse("psi1*t + 2*psi0*x1").unwrap());
    }

    #[test]
    fn linear_scaling_breaks_the_cost() {
        let p = quad();
        let f = TransformationFamily::from_text("[family]\nparams=s1\n[h_x]\nx1=\"x1 + s1*x1\"\n").unwrap();
        let rep = check_quasi_invariance(&p, &f, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // (i) vanishes since L is x-free; (ii) leaves D_t(x1) = u1
        assert!(rep.parameters[0].lagrangian.passed());
        assert_eq!(rep.parameters[0].dynamics.mode, Mode::Violated);
        assert!(rep.parameters[0].conserved.is_none());
    }

    #[test]
    fn time_shift_gives_minus_h() {
        let p = quad();
        let f = TransformationFamily::from_text("[family]\nparams=s1\nh_t=\"t + s1\"\n").unwrap();
        assert_eq!(conserved_quantity(&p, &f, 0), parse("0 - H").unwrap());
    }
}

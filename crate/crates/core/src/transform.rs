//! The clock-as-state images of a problem and the correspondence between their
//! extremals.
//!
//! The Gamkrelidze image rescales time by a positive factor `Υ`: with `dt/dτ = Υ`
//! the image has states `(t_state, z)`, the original controls, `L_img = Υ·L` and
//! dynamics `(Υ, Υ·φ)` over a free horizon. The tau image makes the rate itself a
//! control `v > 0`: controls `(v, w)`, `L_img = L·v`, dynamics `(v, φ·v)` over
//! `[a, b]`. Original extremals lift to zero-level extremals of the image with
//! `p_t = -H`, and zero-level image extremals project back.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::config;
use crate::extremal::{hermite, CanonicalSystem, ExtremalError, Trajectory};
use crate::problem::{costate_name, hamiltonian, Problem, ProblemError, ProblemSpec, TIME};
use crate::sampling::SampleBox;
use crate::symbolic::{substitute, tidy, Compiled, Expr};

pub const CLOCK_STATE: &str = "t_state";
pub const RATE_CONTROL: &str = "v";

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
    #[error("unknown variable '{0}' in upsilon")]
    UnknownVariable(String),
    #[error("upsilon is not positive at {point}: value {value}")]
    NonPositive { point: String, value: f64 },
    #[error("v profile: {0}")]
    VProfile(String),
    #[error("accumulated time is not strictly increasing at node {node}")]
    NonMonotone { node: usize },
    #[error("zero-level hypothesis fails: max |H_img| = {max:e} exceeds {tol:e}")]
    ZeroLevel { max: f64, tol: f64 },
    #[error("trajectory does not belong to the {0}")]
    Mismatch(String),
    #[error("evaluation failed at node {node}: {reason}")]
    Evaluation { node: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Gamkrelidze,
    Tau,
}

#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub kind: Kind,
    pub original: Problem,
    /// For the Gamkrelidze image the horizon `[a, b]` is nominal: the τ-horizon of
    /// an image extremal is whatever `∫ 1/Υ` produces.
    pub image: Problem,
    pub upsilon: Option<Expr>,
    /// Image symbol → original meaning.
    pub link: BTreeMap<String, String>,
}

fn state_name(i: usize) -> String {
    format!("z{}", i + 1)
}

fn control_name(j: usize) -> String {
    format!("w{}", j + 1)
}

/// Renames `t` and the states (and, for tau, the controls) into image symbols.
fn renaming(p: &Problem, kind: Kind) -> HashMap<String, Expr> {
    let mut m = HashMap::new();
    m.insert(TIME.to_string(), Expr::var(CLOCK_STATE));
    for (i, x) in p.states().iter().enumerate() {
        m.insert(x.clone(), Expr::var(state_name(i)));
    }
    if kind == Kind::Tau {
        for (j, u) in p.controls().iter().enumerate() {
            m.insert(u.clone(), Expr::var(control_name(j)));
        }
    }
    m
}

fn link(p: &Problem, kind: Kind) -> BTreeMap<String, String> {
    let mut l = BTreeMap::new();
    l.insert(CLOCK_STATE.into(), TIME.into());
    l.insert(costate_name(0), "-H".into());
    for (i, x) in p.states().iter().enumerate() {
        l.insert(state_name(i), x.clone());
        l.insert(costate_name(i + 1), costate_name(i));
    }
    match kind {
        Kind::Tau => {
            l.insert(RATE_CONTROL.into(), "dt/dtau".into());
            for (j, u) in p.controls().iter().enumerate() {
                l.insert(control_name(j), u.clone());
            }
        }
        Kind::Gamkrelidze => {
            for u in p.controls() {
                l.insert(u.clone(), u.clone());
            }
        }
    }
    l
}

fn image_spec(p: &Problem, name: &str, controls: Vec<String>, lagrangian: Expr, dynamics: Vec<Expr>) -> ProblemSpec {
    let (a, b) = p.horizon();
    let mut states = vec![CLOCK_STATE.to_string()];
    states.extend((0..p.n()).map(state_name));
    let mut x_t0 = vec![Some(a)];
    x_t0.extend_from_slice(p.x_t0());
    let mut x_t1 = vec![Some(b)];
    x_t1.extend_from_slice(p.x_t1());
    ProblemSpec {
        name: format!("{}_{name}", p.name()),
        states,
        controls,
        lagrangian,
        dynamics,
        t0: a,
        t1: b,
        x_t0,
        x_t1,
        psi0: p.psi0(),
    }
}

fn render_point(names: &[String], vals: &[f64]) -> String {
    names.iter().zip(vals).map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(", ")
}

/// Checks `Υ > 0` at the Halton points of `sample_box`.
fn check_positive(upsilon: &Expr, sample_box: &SampleBox) -> Result<(), TransformError> {
    let f = Compiled::new(upsilon, &sample_box.names).map_err(ProblemError::from)?;
    for pt in sample_box.halton(config::POSITIVITY_SAMPLES, config::seed()) {
        let value = f.eval(&pt).unwrap_or(f64::NAN);
        if !(value > 0.0 && value.is_finite()) {
            return Err(TransformError::NonPositive { point: render_point(&sample_box.names, &pt), value });
        }
    }
    Ok(())
}

/// The Gamkrelidze image with time scale `upsilon`, positivity asserted on `sample_box`
/// (the default box of `p` when `None`).
pub fn gamkrelidze(p: &Problem, upsilon: &Expr, sample_box: Option<&SampleBox>) -> Result<TransformedProblem, TransformError> {
    for v in upsilon.free_vars() {
        if v != TIME && !p.states().contains(&v) && !p.controls().contains(&v) {
            return Err(TransformError::UnknownVariable(v));
        }
    }
    let default_box;
    let sample_box = match sample_box {
        Some(b) => b,
        None => {
            default_box = SampleBox::default_for(p);
            &default_box
        }
    };
    check_positive(upsilon, sample_box)?;
    let m = renaming(p, Kind::Gamkrelidze);
    let ups = substitute(upsilon, &m);
    let lagrangian = tidy(&ups.clone().times(substitute(p.lagrangian(), &m)));
    let mut dynamics = vec![ups.clone()];
    dynamics.extend(p.dynamics().iter().map(|f| tidy(&ups.clone().times(substitute(f, &m)))));
    let image = Problem::new(image_spec(p, "gamkrelidze", p.controls().to_vec(), lagrangian, dynamics))?;
    Ok(TransformedProblem {
        kind: Kind::Gamkrelidze,
        original: p.clone(),
        image,
        upsilon: Some(upsilon.clone()),
        link: link(p, Kind::Gamkrelidze),
    })
}

/// The tau image, with the rate `v = dt/dτ` as the first control.
pub fn tau_transform(p: &Problem) -> Result<TransformedProblem, TransformError> {
    let m = renaming(p, Kind::Tau);
    let v = Expr::var(RATE_CONTROL);
    let lagrangian = tidy(&substitute(p.lagrangian(), &m).times(v.clone()));
    let mut dynamics = vec![v.clone()];
    dynamics.extend(p.dynamics().iter().map(|f| tidy(&substitute(f, &m).times(v.clone()))));
    let mut controls = vec![RATE_CONTROL.to_string()];
    controls.extend((0..p.r()).map(control_name));
    let image = Problem::new(image_spec(p, "tau", controls, lagrangian, dynamics))?;
    Ok(TransformedProblem { kind: Kind::Tau, original: p.clone(), image, upsilon: None, link: link(p, Kind::Tau) })
}

/// Lifting diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    pub max_image_hamiltonian: f64,
    pub original_cost: f64,
    pub image_cost: f64,
    pub tau_horizon: (f64, f64),
    /// Factor applied to the supplied v profile so that `∫ v = b - a`.
    pub v_scale: f64,
}

/// Dense output of an extremal: cubic Hermite in `t` with slopes from the canonical
/// equations, controls recomputed by the control law.
struct Dense<'a> {
    sys: &'a CanonicalSystem,
    grid: &'a [f64],
    x: &'a [Vec<f64>],
    psi: &'a [Vec<f64>],
    u: &'a [Vec<f64>],
    dx: Vec<Vec<f64>>,
    dpsi: Vec<Vec<f64>>,
}

struct Sample {
    x: Vec<f64>,
    psi: Vec<f64>,
    u: Vec<f64>,
    h: f64,
    lagrangian: f64,
}

impl<'a> Dense<'a> {
    fn new(
        sys: &'a CanonicalSystem,
        grid: &'a [f64],
        x: &'a [Vec<f64>],
        psi: &'a [Vec<f64>],
        u: &'a [Vec<f64>],
    ) -> Result<Dense<'a>, TransformError> {
        let mut dx = Vec::with_capacity(grid.len());
        let mut dpsi = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let s = sys
                .eval(grid[k], &x[k], &psi[k], &u[k])
                .map_err(|e| TransformError::Evaluation { node: k, reason: e.to_string() })?;
            dx.push(s.dx);
            dpsi.push(s.dpsi);
        }
        Ok(Dense { sys, grid, x, psi, u, dx, dpsi })
    }

    fn at(&self, t: f64, node: usize) -> Result<Sample, TransformError> {
        let m = self.grid.len() - 1;
        let j = self.grid.partition_point(|g| *g <= t).clamp(1, m) - 1;
        let (t0, t1) = (self.grid[j], self.grid[j + 1]);
        let interp = |y: &[Vec<f64>], d: &[Vec<f64>]| -> Vec<f64> {
            if t == t0 {
                return y[j].clone();
            }
            if t == t1 {
                return y[j + 1].clone();
            }
            (0..y[j].len()).map(|i| hermite(t0, t1, y[j][i], y[j + 1][i], d[j][i], d[j + 1][i], t)).collect()
        };
        let x = interp(self.x, &self.dx);
        let psi = interp(self.psi, &self.dpsi);
        let guess = if t - t0 <= t1 - t { &self.u[j] } else { &self.u[j + 1] };
        let s = self
            .sys
            .eval(t, &x, &psi, guess)
            .map_err(|e| TransformError::Evaluation { node, reason: e.to_string() })?;
        Ok(Sample { x, psi, u: s.u, h: s.h, lagrangian: s.lagrangian })
    }
}

/// Fourth-order cumulative integral of grid values on a uniform grid.
fn cumulative(grid: &[f64], f: &[f64]) -> Vec<f64> {
    let m = grid.len() - 1;
    let mut out = vec![0.0; m + 1];
    for k in 0..m {
        let h = grid[k + 1] - grid[k];
        let piece = if m < 3 {
            0.5 * h * (f[k] + f[k + 1])
        } else if k == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if k == m - 1 {
            h / 24.0 * (f[m - 3] - 5.0 * f[m - 2] + 19.0 * f[m - 1] + 9.0 * f[m])
        } else {
            h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2])
        };
        out[k + 1] = out[k] + piece;
    }
    out
}

fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2).zip(f.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
}

fn strictly_increasing(v: &[f64]) -> Result<(), TransformError> {
    match v.windows(2).position(|w| !(w[1] > w[0])) {
        Some(k) => Err(TransformError::NonMonotone { node: k + 1 }),
        None => Ok(()),
    }
}

/// Evaluates the image Hamiltonian at every node of an image trajectory.
pub fn image_hamiltonian(image: &Problem, tr: &Trajectory) -> Result<Vec<f64>, TransformError> {
    let layout = image.layout();
    let h = Compiled::new(&hamiltonian(image).h, layout.names()).map_err(ProblemError::from)?;
    (0..tr.len())
        .map(|k| h.eval(&tr.point(k, &layout)).map_err(|e| TransformError::Evaluation { node: k, reason: e.to_string() }))
        .collect()
}

fn check_belongs(p: &Problem, tr: &Trajectory, what: &str) -> Result<(), TransformError> {
    if tr.states != p.states() || tr.controls != p.controls() || tr.psi0 != p.psi0() || tr.len() < 2 {
        return Err(TransformError::Mismatch(what.into()));
    }
    Ok(())
}

/// Normalizes a positive grid function to `∫ v = b - a` (trapezoid), accepting at
/// most 1% of rescaling. Returns the profile and the factor applied.
fn normalize_v(grid: &[f64], v: &[f64]) -> Result<(Vec<f64>, f64), TransformError> {
    if v.len() != grid.len() {
        return Err(TransformError::VProfile(format!("{} values for {} grid nodes", v.len(), grid.len())));
    }
    if let Some(k) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(TransformError::VProfile(format!("value {} at node {k} is not positive", v[k])));
    }
    let span = grid[grid.len() - 1] - grid[0];
    let integral = trapezoid(grid, v);
    let rel = (integral - span).abs() / span;
    if rel <= config::V_INTEGRAL_TOL {
        return Ok((v.to_vec(), 1.0));
    }
    if rel > config::V_NORMALIZATION_SLACK {
        return Err(TransformError::VProfile(format!("integral {integral} differs from b - a = {span} by more than 1%")));
    }
    let scale = span / integral;
    Ok((v.iter().map(|x| x * scale).collect(), scale))
}

/// Lifts an extremal of the original problem to a zero-level extremal of the image.
/// `v_profile` (tau only) gives `v` at the nodes of `e`; `None` means `v ≡ 1`.
pub fn lift_extremal(
    tp: &TransformedProblem,
    e: &Trajectory,
    v_profile: Option<&[f64]>,
) -> Result<(Trajectory, LiftReport), TransformError> {
    let p = &tp.original;
    check_belongs(p, e, "original problem")?;
    strictly_increasing(&e.grid)?;
    let sys = CanonicalSystem::new(p)?;
    let dense = Dense::new(&sys, &e.grid, &e.x, &e.psi, &e.u)?;
    let m = e.len() - 1;
    let (a, b) = (e.grid[0], e.grid[m]);

    let mut img = Trajectory {
        states: tp.image.states().to_vec(),
        controls: tp.image.controls().to_vec(),
        grid: Vec::with_capacity(m + 1),
        x: Vec::with_capacity(m + 1),
        psi: Vec::with_capacity(m + 1),
        u: Vec::with_capacity(m + 1),
        h: Vec::with_capacity(m + 1),
        psi0: e.psi0,
        cost: 0.0,
    };
    let push = |img: &mut Trajectory, tau: f64, t: f64, s: &Sample, rate: Option<f64>| {
        img.grid.push(tau);
        let mut x = vec![t];
        x.extend_from_slice(&s.x);
        img.x.push(x);
        let mut psi = vec![-s.h];
        psi.extend_from_slice(&s.psi);
        img.psi.push(psi);
        let mut u: Vec<f64> = rate.into_iter().collect();
        u.extend_from_slice(&s.u);
        img.u.push(u);
    };

    let mut v_scale = 1.0;
    match tp.kind {
        Kind::Tau => {
            let (mut v, scale) = match v_profile {
                Some(v) => normalize_v(&e.grid, v)?,
                None => (vec![1.0; m + 1], 1.0),
            };
            v_scale = scale;
            let t: Vec<f64> = if v.iter().all(|x| *x == 1.0) {
                e.grid.clone()
            } else {
                // accumulate with a fourth-order rule; the residual stretch to reach b
                // goes into v so that dt/dτ = v stays consistent with the cost
                let c = cumulative(&e.grid, &v);
                let stretch = (b - a) / c[m];
                v.iter_mut().for_each(|x| *x *= stretch);
                v_scale *= stretch;
                let mut t: Vec<f64> = c.iter().map(|x| a + x * stretch).collect();
                t[m] = b;
                t
            };
            strictly_increasing(&t)?;
            let mut lv = Vec::with_capacity(m + 1);
            for k in 0..=m {
                let s = dense.at(t[k], k)?;
                lv.push(s.lagrangian * v[k]);
                push(&mut img, e.grid[k], t[k], &s, Some(v[k]));
            }
            img.cost = crate::extremal::integrate_samples(&img.grid, &lv);
        }
        Kind::Gamkrelidze => {
            let ups = tp.upsilon.as_ref().expect("gamkrelidze carries upsilon");
            let layout = p.layout();
            let f = Compiled::new(ups, layout.names()).map_err(ProblemError::from)?;
            let mut inv = Vec::with_capacity(m + 1);
            let mut l_img = Vec::with_capacity(m + 1);
            let mut samples = Vec::with_capacity(m + 1);
            for k in 0..=m {
                let s = dense.at(e.grid[k], k)?;
                let mut pt = e.point(k, &layout);
                for (j, u) in s.u.iter().enumerate() {
                    pt[layout.u(j)] = *u;
                }
                let y = f.eval(&pt).map_err(|err| TransformError::Evaluation { node: k, reason: err.to_string() })?;
                if !(y > 0.0 && y.is_finite()) {
                    return Err(TransformError::NonPositive { point: render_point(layout.names(), &pt), value: y });
                }
                inv.push(1.0 / y);
                l_img.push(y * s.lagrangian);
                samples.push(s);
            }
            // τ(t) = τ_a + ∫ 1/Υ dθ by trapezoidal accumulation
            let mut tau = vec![a; m + 1];
            for k in 0..m {
                tau[k + 1] = tau[k] + 0.5 * (e.grid[k + 1] - e.grid[k]) * (inv[k] + inv[k + 1]);
            }
            strictly_increasing(&tau)?;
            for k in 0..=m {
                push(&mut img, tau[k], e.grid[k], &samples[k], None);
            }
            // ∫ Υ·L dτ carried out in the clock variable, dτ = dt/Υ
            let integrand: Vec<f64> = l_img.iter().zip(&inv).map(|(l, i)| l * i).collect();
            img.cost = crate::extremal::integrate_samples(&e.grid, &integrand);
        }
    }

    img.h = image_hamiltonian(&tp.image, &img)?;
    let max_h = img.h.iter().fold(0.0_f64, |acc, h| acc.max(h.abs()));
    let report = LiftReport {
        max_image_hamiltonian: max_h,
        original_cost: e.cost,
        image_cost: img.cost,
        tau_horizon: (img.grid[0], img.grid[m]),
        v_scale,
    };
    if max_h > config::LIFT_ZERO_LEVEL_TOL {
        return Err(TransformError::ZeroLevel { max: max_h, tol: config::LIFT_ZERO_LEVEL_TOL });
    }
    Ok((img, report))
}

/// Projection diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectReport {
    pub max_image_hamiltonian: f64,
    pub image_cost: f64,
    pub original_cost: f64,
    pub cost_gap: f64,
}

/// Projects a zero-level image extremal onto the uniform grid of the original
/// problem with the same number of intervals.
pub fn project_extremal(tp: &TransformedProblem, img: &Trajectory) -> Result<(Trajectory, ProjectReport), TransformError> {
    check_belongs(&tp.image, img, "image problem")?;
    let h = image_hamiltonian(&tp.image, img)?;
    let max_h = h.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !(max_h <= config::PROJECT_ZERO_LEVEL_TOL) {
        return Err(TransformError::ZeroLevel { max: max_h, tol: config::PROJECT_ZERO_LEVEL_TOL });
    }
    let n = tp.original.n();
    let offset = usize::from(tp.kind == Kind::Tau);
    let t: Vec<f64> = img.x.iter().map(|x| x[0]).collect();
    strictly_increasing(&t)?;
    let z: Vec<Vec<f64>> = img.x.iter().map(|x| x[1..].to_vec()).collect();
    let pz: Vec<Vec<f64>> = img.psi.iter().map(|p| p[1..=n].to_vec()).collect();
    let w: Vec<Vec<f64>> = img.u.iter().map(|u| u[offset..].to_vec()).collect();

    let p = &tp.original;
    let sys = CanonicalSystem::new(p)?;
    let dense = Dense::new(&sys, &t, &z, &pz, &w)?;
    let (a, b) = p.horizon();
    let m = img.len() - 1;
    let dt = (b - a) / m as f64;
    let mut out = Trajectory {
        states: p.states().to_vec(),
        controls: p.controls().to_vec(),
        grid: Vec::with_capacity(m + 1),
        x: Vec::with_capacity(m + 1),
        psi: Vec::with_capacity(m + 1),
        u: Vec::with_capacity(m + 1),
        h: Vec::with_capacity(m + 1),
        psi0: img.psi0,
        cost: 0.0,
    };
    let mut lag = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let tk = if k == m { b } else { a + k as f64 * dt };
        if tk < t[0] || tk > t[m] {
            return Err(TransformError::Mismatch(format!("image clock range [{}, {}] of the original horizon", t[0], t[m])));
        }
        let s = dense.at(tk, k)?;
        out.grid.push(tk);
        out.x.push(s.x);
        out.psi.push(s.psi);
        out.u.push(s.u);
        out.h.push(s.h);
        lag.push(s.lagrangian);
    }
    out.cost = crate::extremal::integrate_samples(&out.grid, &lag);
    let report = ProjectReport {
        max_image_hamiltonian: max_h,
        image_cost: img.cost,
        original_cost: out.cost,
        cost_gap: (img.cost - out.cost).abs(),
    };
    Ok((out, report))
}

/// Largest absolute difference between two trajectories on the same grid, over
/// `x`, `u` and `ψ`.
pub fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut d = 0.0_f64;
    for k in 0..a.len().min(b.len()) {
        d = d.max((a.grid[k] - b.grid[k]).abs());
        for (p, q) in [(&a.x[k], &b.x[k]), (&a.u[k], &b.u[k]), (&a.psi[k], &b.psi[k])] {
            for (x, y) in p.iter().zip(q) {
                d = d.max((x - y).abs());
            }
        }
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{shoot, ShootOptions};
    use crate::symbolic::parse;

    const QUAD: &str = "[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2\"\n[dynamics]\nx1=\"u1\"\n[boundary]\nx1_t0=0\nx1_t1=1\n";

    fn quad() -> Problem {
        Problem::from_text(QUAD).unwrap()
    }

    fn prob10() -> Problem {
        Problem::from_text(&format!(
            "[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2\"\n[dynamics]\nx1=\"u1*x1\"\n[boundary]\nx1_t0=1\nx1_t1={}\n",
            std::f64::consts::E
        ))
        .unwrap()
    }

    fn extremal(p: &Problem, guess: f64) -> Trajectory {
        shoot(p, &[guess], ShootOptions::default()).unwrap().trajectory
    }

    #[test]
    fn tau_image_of_quadratic() {
        let tp = tau_transform(&quad()).unwrap();
        assert_eq!(tp.image.states(), ["t_state", "z1"]);
        assert_eq!(tp.image.controls(), ["v", "w1"]);
        assert_eq!(*tp.image.lagrangian(), parse("w1^2*v").unwrap());
        assert_eq!(tp.image.dynamics(), [parse("v").unwrap(), parse("w1*v").unwrap()]);
        assert!(tp.image.is_autonomous());
        assert_eq!(tp.link["psi1"], "-H");
    }

    #[test]
    fn tau_image_of_problem_ten() {
        let tp = tau_transform(&prob10()).unwrap();
        assert_eq!(*tp.image.lagrangian(), parse("w1^2*v").unwrap());
        assert_eq!(tp.image.dynamics()[1], parse("w1*z1*v").unwrap());
    }

    #[test]
    fn time_dependent_problem_becomes_autonomous() {
        let p = Problem::from_text("[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2 + t*x1\"\n[dynamics]\nx1=\"u1\"\n").unwrap();
        assert!(!p.is_autonomous());
        assert!(tau_transform(&p).unwrap().image.is_autonomous());
        assert!(gamkrelidze(&p, &parse("1").unwrap(), None).unwrap().image.is_autonomous());
    }

    #[test]
    fn gamkrelidze_time_optimal_form() {
        let tp = gamkrelidze(&quad(), &parse("1/u1^2").unwrap(), None).unwrap();
        assert_eq!(*tp.image.lagrangian(), Expr::one());
        assert_eq!(tp.image.dynamics()[1], parse("1/u1").unwrap());
    }

    #[test]
    fn gamkrelidze_unit_scale_appends_clock() {
        let tp = gamkrelidze(&quad(), &Expr::one(), None).unwrap();
        assert_eq!(tp.image.dynamics(), [Expr::one(), parse("u1").unwrap()]);
        assert_eq!(*tp.image.lagrangian(), parse("u1^2").unwrap());
        assert_eq!(tp.image.x_t0(), [Some(0.0), Some(0.0)]);
        assert_eq!(tp.image.x_t1(), [Some(1.0), Some(1.0)]);
    }

    #[test]
    fn nonpositive_upsilon_is_rejected() {
        assert!(matches!(gamkrelidze(&quad(), &parse("-1").unwrap(), None), Err(TransformError::NonPositive { .. })));
        assert!(matches!(gamkrelidze(&quad(), &parse("x1").unwrap(), None), Err(TransformError::NonPositive { .. })));
        assert!(matches!(gamkrelidze(&quad(), &parse("y").unwrap(), None), Err(TransformError::UnknownVariable(_))));
    }

    #[test]
    fn tau_lift_of_quadratic_with_unit_rate() {
        let p = quad();
        let e = extremal(&p, 0.0);
        let tp = tau_transform(&p).unwrap();
        let (img, rep) = lift_extremal(&tp, &e, None).unwrap();
        for k in 0..img.len() {
            assert_eq!(img.x[k][0], e.grid[k]);
            assert_eq!(img.x[k][1], e.x[k][0]);
            assert_eq!(img.u[k][1], e.u[k][0]);
            assert_eq!(img.psi[k][1], e.psi[k][0]);
            assert!((img.psi[k][0] + 1.0).abs() < 1e-9);
        }
        assert!(rep.max_image_hamiltonian <= 1e-12);
        assert!((rep.image_cost - e.cost).abs() < 1e-9);
    }

    #[test]
    fn gamkrelidze_lift_with_unit_scale_on_extremal() {
        let p = quad();
        let e = extremal(&p, 0.0);
        let tp = gamkrelidze(&p, &parse("1/u1^2").unwrap(), None).unwrap();
        let (img, rep) = lift_extremal(&tp, &e, None).unwrap();
        for k in 0..img.len() {
            assert!((img.grid[k] - e.grid[k]).abs() < 1e-8);
        }
        assert!(rep.max_image_hamiltonian <= 1e-12);
    }

    #[test]
    fn round_trips() {
        for (p, guess) in [(quad(), 0.0), (prob10(), 1.0)] {
            let e = extremal(&p, guess);
            let v: Vec<f64> = e.grid.iter().map(|t| 1.0 + 0.5 * (std::f64::consts::PI * t).sin()).collect();
            let span = trapezoid(&e.grid, &v);
            let v: Vec<f64> = v.iter().map(|x| x / span).collect();
            let tau = tau_transform(&p).unwrap();
            let gam = gamkrelidze(&p, &Expr::one().divide(p.lagrangian().clone()), None).unwrap();
            for (tp, profile) in [(&tau, None), (&tau, Some(v.as_slice())), (&gam, None)] {
                let (img, lift) = lift_extremal(tp, &e, profile).unwrap();
                assert!(lift.max_image_hamiltonian <= 1e-7, "{lift:?}");
                assert!((lift.image_cost - e.cost).abs() <= 1e-7, "{lift:?}");
                let (back, proj) = project_extremal(tp, &img).unwrap();
                assert_eq!(back.psi0, e.psi0);
                let dev = max_deviation(&back, &e);
                assert!(dev <= 1e-7, "{:?} deviation {dev}", tp.kind);
                assert!(proj.cost_gap <= 1e-6);
            }
        }
    }

    #[test]
    fn v_profile_checks() {
        let p = quad();
        let e = extremal(&p, 0.0);
        let tp = tau_transform(&p).unwrap();
        let far = vec![2.0; e.len()];
        assert!(matches!(lift_extremal(&tp, &e, Some(&far)), Err(TransformError::VProfile(_))));
        let near = vec![1.005; e.len()];
        let (_, rep) = lift_extremal(&tp, &e, Some(&near)).unwrap();
        assert!((rep.v_scale - 1.0 / 1.005).abs() < 1e-9);
        let mut neg = vec![1.0; e.len()];
        neg[3] = -1.0;
        assert!(matches!(lift_extremal(&tp, &e, Some(&neg)), Err(TransformError::VProfile(_))));
    }

    #[test]
    fn projection_refuses_nonzero_level() {
        let p = quad();
        let e = extremal(&p, 0.0);
        let tp = tau_transform(&p).unwrap();
        let (mut img, _) = lift_extremal(&tp, &e, None).unwrap();
        for psi in &mut img.psi {
            psi[0] = 0.0;
        }
        match project_extremal(&tp, &img) {
            Err(TransformError::ZeroLevel { max, .. }) => assert!((max - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn projection_refuses_nonmonotone_clock() {
        let p = quad();
        let e = extremal(&p, 0.0);
        let tp = tau_transform(&p).unwrap();
        let (mut img, _) = lift_extremal(&tp, &e, None).unwrap();
        img.x[5][0] = img.x[4][0];
        assert!(matches!(project_extremal(&tp, &img), Err(TransformError::NonMonotone { node: 5 })));
    }

    #[test]
    fn cumulative_rule_is_exact_for_cubics() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let f: Vec<f64> = grid.iter().map(|t| t * t * t - t + 2.0).collect();
        let c = cumulative(&grid, &f);
        for (t, v) in grid.iter().zip(&c) {
            assert!((v - (t.powi(4) / 4.0 - t * t / 2.0 + 2.0 * t)).abs() < 1e-14);
        }
    }
}

//! Optimal control problems in Lagrange form, their Pontryagin Hamiltonian,
//! and elimination of the control through the stationarity condition.
//!
//! A problem is
//!
//! ```text
//! minimize  ∫_a^b L(t, x, u) dt   subject to   x' = φ(t, x, u)
//! ```
//!
//! with optional fixed endpoints, unconstrained controls `u ∈ ℝʳ` and a cost
//! multiplier `ψ₀ ∈ {0, -1}`.

mod control;
mod hamiltonian;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::sections::{parse_sections, quoted, SectionError, SectionFile};
use crate::symbolic::{parse, Expr, Func, SymbolicError};

pub use control::{
    check_curvature, eliminate_control, ControlLaw, ControlSolver, CurvatureReport, NewtonSpec,
};
pub use hamiltonian::{hamiltonian, Hamiltonian};

/// Name of the independent variable in every expression.
pub const TIME: &str = "t";
/// Name of the cost multiplier.
pub const PSI0: &str = "psi0";
/// Name that stands for the Hamiltonian inside user-supplied functions.
pub const HAMILTONIAN: &str = "H";

/// Name of the `i`-th costate (zero-based index).
pub fn costate_name(i: usize) -> String {
    format!("psi{}", i + 1)
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] SectionError),
    #[error("line {line}: {source}")]
    Expression { line: usize, source: SymbolicError },
    #[error("missing {0}")]
    Missing(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown variable '{name}' in {context}")]
    UnknownVariable { name: String, context: String },
    #[error("invalid name '{0}': reserved or malformed")]
    InvalidName(String),
    #[error("horizon must satisfy t0 < t1, got [{t0}, {t1}]")]
    Horizon { t0: f64, t1: f64 },
    #[error("psi0 must be 0 or -1, got {0}")]
    Psi0(f64),
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
    #[error("singular stationarity system: no usable pivot for control '{control}' (coefficients {coefficients})")]
    SingularStationarity { control: String, coefficients: String },
    #[error("abnormal branch: stationarity does not involve the control, so the control is undetermined")]
    ControlUndetermined,
    #[error("nontriviality fails: with psi0 = 0 the stationarity condition forces psi = 0, so (psi0, psi) vanishes identically")]
    TrivialMultiplier,
    #[error("stationarity Newton solve failed at t = {t}: {reason}")]
    Newton { t: f64, reason: String },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Ordered variable layout `[t, x.., u.., psi0, psi..]` used for compiled evaluation.
#[derive(Debug, Clone)]
pub struct Layout {
    names: Vec<String>,
    n: usize,
    r: usize,
}

impl Layout {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn t(&self) -> usize {
        0
    }

    pub fn x(&self, i: usize) -> usize {
        1 + i
    }

    pub fn u(&self, j: usize) -> usize {
        1 + self.n + j
    }

    pub fn psi0(&self) -> usize {
        1 + self.n + self.r
    }

    pub fn psi(&self, i: usize) -> usize {
        2 + self.n + self.r + i
    }

    /// A point with every slot zero.
    pub fn point(&self) -> Vec<f64> {
        vec![0.0; self.names.len()]
    }
}

/// An optimal control problem in Lagrange form.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    name: String,
    states: Vec<String>,
    controls: Vec<String>,
    lagrangian: Expr,
    dynamics: Vec<Expr>,
    t0: f64,
    t1: f64,
    x_t0: Vec<Option<f64>>,
    x_t1: Vec<Option<f64>>,
    psi0: f64,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn reserved(name: &str) -> bool {
    name == TIME
        || name == HAMILTONIAN
        || Func::from_name(name).is_some()
        || name
            .strip_prefix("psi")
            .is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
}

/// Specification of a problem before validation.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub lagrangian: Expr,
    pub dynamics: Vec<Expr>,
    pub t0: f64,
    pub t1: f64,
    pub x_t0: Vec<Option<f64>>,
    pub x_t1: Vec<Option<f64>>,
    pub psi0: f64,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Problem, ProblemError> {
        let ProblemSpec { name, states, controls, lagrangian, dynamics, t0, t1, x_t0, x_t1, psi0 } = spec;
        if !(t0 < t1) {
            return Err(ProblemError::Horizon { t0, t1 });
        }
        if psi0 != 0.0 && psi0 != -1.0 {
            return Err(ProblemError::Psi0(psi0));
        }
        if states.is_empty() {
            return Err(ProblemError::Missing("state list".into()));
        }
        if controls.is_empty() {
            return Err(ProblemError::Missing("control list".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in states.iter().chain(&controls) {
            if !valid_identifier(v) || reserved(v) || !seen.insert(v.clone()) {
                return Err(ProblemError::InvalidName(v.clone()));
            }
        }
        let n = states.len();
        if dynamics.len() != n {
            return Err(ProblemError::Dimension(format!(
                "{} dynamics entries for {} states",
                dynamics.len(),
                n
            )));
        }
        if x_t0.len() != n || x_t1.len() != n {
            return Err(ProblemError::Dimension(format!(
                "boundary vectors of length {}/{} for {} states",
                x_t0.len(),
                x_t1.len(),
                n
            )));
        }
        let check = |e: &Expr, context: String| -> Result<(), ProblemError> {
            for v in e.free_vars() {
                if v != TIME && !states.contains(&v) && !controls.contains(&v) {
                    return Err(ProblemError::UnknownVariable { name: v, context });
                }
            }
            Ok(())
        };
        check(&lagrangian, "the Lagrangian".into())?;
        for (i, f) in dynamics.iter().enumerate() {
            check(f, format!("dynamics of {}", states[i]))?;
        }
        Ok(Problem { name, states, controls, lagrangian, dynamics, t0, t1, x_t0, x_t1, psi0 })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Problem, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
        Problem::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Problem, ProblemError> {
        let file = parse_sections(text)?;
        parse_problem(&file)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn costates(&self) -> Vec<String> {
        (0..self.n()).map(costate_name).collect()
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn r(&self) -> usize {
        self.controls.len()
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn dynamics(&self) -> &[Expr] {
        &self.dynamics
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn x_t0(&self) -> &[Option<f64>] {
        &self.x_t0
    }

    pub fn x_t1(&self) -> &[Option<f64>] {
        &self.x_t1
    }

    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn with_psi0(mut self, psi0: f64) -> Result<Problem, ProblemError> {
        if psi0 != 0.0 && psi0 != -1.0 {
            return Err(ProblemError::Psi0(psi0));
        }
        self.psi0 = psi0;
        Ok(self)
    }

    /// Fully specified initial state, if every component is fixed.
    pub fn initial_state(&self) -> Option<Vec<f64>> {
        self.x_t0.iter().copied().collect()
    }

    /// Fully specified terminal state, if every component is fixed.
    pub fn terminal_state(&self) -> Option<Vec<f64>> {
        self.x_t1.iter().copied().collect()
    }

    /// No explicit dependence on `t` in `L` or `φ`.
    pub fn is_autonomous(&self) -> bool {
        !self.lagrangian.depends_on(TIME) && self.dynamics.iter().all(|f| !f.depends_on(TIME))
    }

    /// The basic problem of the calculus of variations: `φ = u` with `r = n`.
    pub fn is_basic(&self) -> bool {
        self.n() == self.r()
            && self
                .dynamics
                .iter()
                .zip(&self.controls)
                .all(|(f, u)| *f == Expr::var(u.clone()))
    }

    pub fn layout(&self) -> Layout {
        let mut names = vec![TIME.to_string()];
        names.extend(self.states.iter().cloned());
        names.extend(self.controls.iter().cloned());
        names.push(PSI0.to_string());
        names.extend(self.costates());
        Layout { names, n: self.n(), r: self.r() }
    }

    /// Non-fatal observations about the problem.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.psi0 == 0.0 && self.is_basic() {
            out.push(
                "psi0 = 0 on a basic problem (x' = u): stationarity gives psi = -psi0 dL/du = 0, so no abnormal extremal exists"
                    .to_string(),
            );
        }
        out
    }

    /// Serializes in the problem-file format.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[problem]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "t0 = {}", self.t0);
        let _ = writeln!(s, "t1 = {}", self.t1);
        let _ = writeln!(s, "states = {}", self.states.join(", "));
        let _ = writeln!(s, "controls = {}", self.controls.join(", "));
        let _ = writeln!(s, "psi0 = {}", self.psi0);
        let _ = writeln!(s, "\n[lagrangian]");
        let _ = writeln!(s, "L = {}", quoted(&self.lagrangian.to_string()));
        let _ = writeln!(s, "\n[dynamics]");
        for (x, f) in self.states.iter().zip(&self.dynamics) {
            let _ = writeln!(s, "{x} = {}", quoted(&f.to_string()));
        }
        let fixed: Vec<String> = self
            .states
            .iter()
            .enumerate()
            .flat_map(|(i, x)| {
                let a = self.x_t0[i].map(|v| format!("{x}_t0 = {v}"));
                let b = self.x_t1[i].map(|v| format!("{x}_t1 = {v}"));
                a.into_iter().chain(b)
            })
            .collect();
        if !fixed.is_empty() {
            let _ = writeln!(s, "\n[boundary]");
            for line in fixed {
                let _ = writeln!(s, "{line}");
            }
        }
        s
    }
}

fn parse_real(value: &str, line: usize) -> Result<f64, ProblemError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ProblemError::Value { line, message: format!("expected a real number, found '{value}'") })
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_expr(value: &str, line: usize) -> Result<Expr, ProblemError> {
    parse(value).map_err(|source| ProblemError::Expression { line, source })
}

fn parse_problem(file: &SectionFile) -> Result<Problem, ProblemError> {
    let header = file
        .section("problem")
        .ok_or_else(|| ProblemError::Missing("[problem] section".into()))?;
    let required = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| ProblemError::Missing(format!("key '{key}' in [problem]")))
    };
    let name = header.get("name").map(|e| e.value.clone()).unwrap_or_default();
    let t0e = required("t0")?;
    let t1e = required("t1")?;
    let t0 = parse_real(&t0e.value, t0e.line)?;
    let t1 = parse_real(&t1e.value, t1e.line)?;
    let states = parse_list(&required("states")?.value);
    let controls = parse_list(&required("controls")?.value);
    let psi0 = match header.get("psi0") {
        Some(e) => parse_real(&e.value, e.line)?,
        None => crate::config::DEFAULT_PSI0,
    };
    for e in &header.entries {
        if !["name", "t0", "t1", "states", "controls", "psi0"].contains(&e.key.as_str()) {
            return Err(ProblemError::Value { line: e.line, message: format!("unknown key '{}' in [problem]", e.key) });
        }
    }

    let lag = file
        .section("lagrangian")
        .and_then(|s| s.get("L"))
        .ok_or_else(|| ProblemError::Missing("key 'L' in [lagrangian]".into()))?;
    let lagrangian = parse_expr(&lag.value, lag.line)?;

    let dyn_section = file
        .section("dynamics")
        .ok_or_else(|| ProblemError::Missing("[dynamics] section".into()))?;
    if dyn_section.entries.len() != states.len() {
        return Err(ProblemError::Dimension(format!(
            "{} dynamics entries for {} states",
            dyn_section.entries.len(),
            states.len()
        )));
    }
    let mut dynamics = Vec::with_capacity(states.len());
    for x in &states {
        let e = dyn_section
            .get(x)
            .ok_or_else(|| ProblemError::Missing(format!("dynamics for state '{x}'")))?;
        dynamics.push(parse_expr(&e.value, e.line)?);
    }
    for e in &dyn_section.entries {
        if !states.contains(&e.key) {
            return Err(ProblemError::UnknownVariable { name: e.key.clone(), context: "[dynamics]".into() });
        }
    }

    let mut x_t0 = vec![None; states.len()];
    let mut x_t1 = vec![None; states.len()];
    if let Some(b) = file.section("boundary") {
        for e in &b.entries {
            let (state, end) = e
                .key
                .rsplit_once('_')
                .ok_or_else(|| ProblemError::Value { line: e.line, message: format!("bad boundary key '{}'", e.key) })?;
            let i = states
                .iter()
                .position(|x| x == state)
                .ok_or_else(|| ProblemError::UnknownVariable { name: state.into(), context: "[boundary]".into() })?;
            let v = parse_real(&e.value, e.line)?;
            match end {
                "t0" => x_t0[i] = Some(v),
                "t1" => x_t1[i] = Some(v),
                _ => {
                    return Err(ProblemError::Value {
                        line: e.line,
                        message: format!("boundary key '{}' must end in _t0 or _t1", e.key),
                    })
                }
            }
        }
    }
    for s in &file.sections {
        if !["problem", "lagrangian", "dynamics", "boundary"].contains(&s.name.as_str()) {
            return Err(ProblemError::Value { line: s.line, message: format!("unknown section [{}]", s.name) });
        }
    }

    Problem::new(ProblemSpec { name, states, controls, lagrangian, dynamics, t0, t1, x_t0, x_t1, psi0 })
}

//! Symbolic expressions: parsing, canonical form, differentiation, substitution,
//! evaluation and zero testing.

mod diff;
mod eval;
mod expr;
mod parse;
mod render;
mod simplify;
mod zero;

use std::collections::HashMap;

use thiserror::Error;

pub use diff::{differentiate, gradient};
pub use eval::{evaluate, Bindings, Compiled};
pub use expr::{Expr, Func, Real};
pub use parse::parse;
pub use render::render;
pub use simplify::{canon, expand, tidy};
pub use zero::{symbolically_zero, zero_test, ZeroVerdict, NUMERIC_ZERO_POINTS, NUMERIC_ZERO_TOL};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SymbolicError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown function '{name}' at line {line}, column {col}")]
    UnknownFunction { name: String, line: usize, col: usize },
    #[error("unbound variable '{name}'")]
    Unbound { name: String },
    #[error("domain error in '{expr}'")]
    Domain { expr: String },
}

/// Simultaneous substitution of variables by expressions, followed by canonicalization.
pub fn substitute(e: &Expr, assignments: &HashMap<String, Expr>) -> Expr {
    if assignments.is_empty() {
        return canon(e);
    }
    canon(&replace(e, assignments))
}

fn replace(e: &Expr, a: &HashMap<String, Expr>) -> Expr {
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var(name) => a.get(name).cloned().unwrap_or_else(|| e.clone()),
        Expr::Add(xs) => Expr::Add(xs.iter().map(|x| replace(x, a)).collect()),
        Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| replace(x, a)).collect()),
        Expr::Pow(b, x) => Expr::Pow(Box::new(replace(b, a)), Box::new(replace(x, a))),
        Expr::Neg(x) => Expr::Neg(Box::new(replace(x, a))),
        Expr::Div(n, d) => Expr::Div(Box::new(replace(n, a)), Box::new(replace(d, a))),
        Expr::Func(f, x) => Expr::Func(*f, Box::new(replace(x, a))),
    }
}

/// Substitutes numeric values for the given variables.
pub fn substitute_values(e: &Expr, values: &[(&str, f64)]) -> Expr {
    let map = values
        .iter()
        .map(|(k, v)| (k.to_string(), Expr::constant(*v)))
        .collect();
    substitute(e, &map)
}

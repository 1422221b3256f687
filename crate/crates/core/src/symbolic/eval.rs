use std::collections::HashMap;

use super::expr::{Expr, Func};
use super::SymbolicError;

/// Variable name to value. Extra entries are ignored by evaluation.
pub type Bindings = HashMap<String, f64>;

fn domain(e: &Expr) -> SymbolicError {
    SymbolicError::Domain { expr: e.to_string() }
}

fn power(b: f64, x: f64) -> f64 {
    if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 {
        b.powi(x as i32)
    } else {
        b.powf(x)
    }
}

/// Evaluates `e` at `b`. Any non-finite intermediate result is a domain error
/// naming the offending subexpression.
pub fn evaluate(e: &Expr, b: &Bindings) -> Result<f64, SymbolicError> {
    let v = match e {
        Expr::Const(c) => c.get(),
        Expr::Var(name) => *b
            .get(name)
            .ok_or_else(|| SymbolicError::Unbound { name: name.clone() })?,
        Expr::Add(xs) => {
            let mut acc = 0.0;
            for x in xs {
                acc += evaluate(x, b)?;
            }
            acc
        }
        Expr::Mul(xs) => {
            let mut acc = 1.0;
            for x in xs {
                acc *= evaluate(x, b)?;
            }
            acc
        }
        Expr::Pow(base, x) => {
            let bv = evaluate(base, b)?;
            let xv = evaluate(x, b)?;
            if bv == 0.0 && xv < 0.0 {
                return Err(domain(e));
            }
            power(bv, xv)
        }
        Expr::Neg(a) => -evaluate(a, b)?,
        Expr::Div(num, den) => {
            let d = evaluate(den, b)?;
            if d == 0.0 {
                return Err(domain(e));
            }
            evaluate(num, b)? / d
        }
        Expr::Func(f, a) => {
            let x = evaluate(a, b)?;
            f.apply(x).ok_or_else(|| domain(e))?
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Slot(usize),
    Add(Vec<Node>),
    Mul(Vec<Node>),
    PowI(Box<Node>, i32),
    Pow(Box<Node>, Box<Node>),
    Func(Func, Box<Node>),
}

impl Node {
    fn eval(&self, vals: &[f64]) -> Option<f64> {
        let v = match self {
            Node::Const(c) => *c,
            Node::Slot(i) => vals[*i],
            Node::Add(xs) => {
                let mut acc = 0.0;
                for x in xs {
                    acc += x.eval(vals)?;
                }
                acc
            }
            Node::Mul(xs) => {
                let mut acc = 1.0;
                for x in xs {
                    acc *= x.eval(vals)?;
                }
                acc
            }
            Node::PowI(b, n) => {
                let bv = b.eval(vals)?;
                if bv == 0.0 && *n < 0 {
                    return None;
                }
                bv.powi(*n)
            }
            Node::Pow(b, x) => {
                let bv = b.eval(vals)?;
                let xv = x.eval(vals)?;
                if bv == 0.0 && xv < 0.0 {
                    return None;
                }
                power(bv, xv)
            }
            Node::Func(f, a) => f.apply(a.eval(vals)?)?,
        };
        v.is_finite().then_some(v)
    }
}

/// An expression bound to a fixed variable layout for repeated fast evaluation.
#[derive(Debug, Clone)]
pub struct Compiled {
    node: Node,
    source: Expr,
    layout: Vec<String>,
}

impl Compiled {
    /// Compiles `e` against `layout`; every free variable must appear in the layout.
    pub fn new<S: AsRef<str>>(e: &Expr, layout: &[S]) -> Result<Compiled, SymbolicError> {
        let names: Vec<String> = layout.iter().map(|s| s.as_ref().to_string()).collect();
        let node = lower(e, &names)?;
        Ok(Compiled { node, source: e.clone(), layout: names })
    }

    pub fn expr(&self) -> &Expr {
        &self.source
    }

    /// Evaluates with `vals[i]` bound to `layout[i]`.
    pub fn eval(&self, vals: &[f64]) -> Result<f64, SymbolicError> {
        match self.node.eval(vals) {
            Some(v) => Ok(v),
            None => {
                // slow path only to name the failing subexpression
                let b: Bindings = self.layout.iter().cloned().zip(vals.iter().copied()).collect();
                match evaluate(&self.source, &b) {
                    Err(e) => Err(e),
                    Ok(_) => Err(domain(&self.source)),
                }
            }
        }
    }
}

fn lower(e: &Expr, layout: &[String]) -> Result<Node, SymbolicError> {
    Ok(match e {
        Expr::Const(c) => Node::Const(c.get()),
        Expr::Var(name) => Node::Slot(
            layout
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SymbolicError::Unbound { name: name.clone() })?,
        ),
        Expr::Add(xs) => Node::Add(xs.iter().map(|x| lower(x, layout)).collect::<Result<_, _>>()?),
        Expr::Mul(xs) => Node::Mul(xs.iter().map(|x| lower(x, layout)).collect::<Result<_, _>>()?),
        Expr::Pow(b, x) => match x.as_const() {
            Some(n) if n.fract() == 0.0 && n.abs() <= 64.0 => {
                Node::PowI(Box::new(lower(b, layout)?), n as i32)
            }
            _ => Node::Pow(Box::new(lower(b, layout)?), Box::new(lower(x, layout)?)),
        },
        Expr::Neg(a) => Node::Mul(vec![Node::Const(-1.0), lower(a, layout)?]),
        Expr::Div(a, b) => Node::Mul(vec![
            lower(a, layout)?,
            Node::PowI(Box::new(lower(b, layout)?), -1),
        ]),
        Expr::Func(f, a) => Node::Func(*f, Box::new(lower(a, layout)?)),
    })
}

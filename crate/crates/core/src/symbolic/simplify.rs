//! Canonical form and polynomial expansion.
//!
//! Canonical trees satisfy:
//! - no `Neg` or `Div` nodes (they become `-1 * a` and `b ^ -1`);
//! - sums and products are flattened, their constants folded into a single
//!   leading constant, their operands sorted by the derived `Ord`;
//! - like terms of a sum are merged by coefficient, like bases of a product by exponent;
//! - `x*0 -> 0`, `x+0 -> x`, `x^1 -> x`, `x^0 -> 1`.
//!
//! Nothing is factored and no trigonometric identity is applied.

use std::collections::BTreeMap;

use super::expr::{Expr, Func, Real};

/// Largest integer power of a sum that [`expand`] multiplies out.
const MAX_EXPAND_POWER: f64 = 12.0;
/// Expansion gives up when a sum would exceed this many terms.
const MAX_EXPAND_TERMS: usize = 20_000;

pub fn canon(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(Real::new(c.get())),
        Expr::Var(_) => e.clone(),
        Expr::Neg(a) => mul(vec![Expr::constant(-1.0), canon(a)]),
        Expr::Div(a, b) => mul(vec![canon(a), pow(canon(b), Expr::constant(-1.0))]),
        Expr::Add(xs) => add(xs.iter().map(canon).collect()),
        Expr::Mul(xs) => mul(xs.iter().map(canon).collect()),
        Expr::Pow(b, x) => pow(canon(b), canon(x)),
        Expr::Func(f, a) => func(*f, canon(a)),
    }
}

fn as_integer(e: &Expr) -> Option<f64> {
    e.as_const().filter(|c| c.fract() == 0.0 && c.is_finite())
}

/// Splits a canonical term into its numeric coefficient and the remaining factor.
fn split_coefficient(term: Expr) -> (f64, Option<Expr>) {
    match term {
        Expr::Const(c) => (c.get(), None),
        Expr::Mul(mut xs) => {
            if let Some(c) = xs.first().and_then(Expr::as_const) {
                xs.remove(0);
                let rest = if xs.len() == 1 {
                    xs.pop().unwrap()
                } else {
                    Expr::Mul(xs)
                };
                (c, Some(rest))
            } else {
                (1.0, Some(Expr::Mul(xs)))
            }
        }
        other => (1.0, Some(other)),
    }
}

/// Canonical sum of canonical operands.
pub(crate) fn add(children: Vec<Expr>) -> Expr {
    let mut constant = 0.0;
    let mut groups: BTreeMap<Expr, f64> = BTreeMap::new();
    let mut stack = children;
    while let Some(child) = stack.pop() {
        match child {
            Expr::Add(inner) => stack.extend(inner),
            other => match split_coefficient(other) {
                (c, None) => constant += c,
                (c, Some(rest)) => *groups.entry(rest).or_insert(0.0) += c,
            },
        }
    }
    let mut terms: Vec<Expr> = groups
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(rest, c)| {
            if c == 1.0 {
                rest
            } else {
                mul(vec![Expr::constant(c), rest])
            }
        })
        .collect();
    if constant != 0.0 || !constant.is_finite() {
        terms.push(Expr::constant(constant));
    }
    match terms.len() {
        0 => Expr::zero(),
        1 => terms.pop().unwrap(),
        _ => {
            terms.sort();
            Expr::Add(terms)
        }
    }
}

/// Canonical product of canonical operands.
pub(crate) fn mul(children: Vec<Expr>) -> Expr {
    let mut coefficient = 1.0;
    let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    let mut stack = children;
    while let Some(child) = stack.pop() {
        match child {
            Expr::Mul(inner) => stack.extend(inner),
            Expr::Const(c) => coefficient *= c.get(),
            Expr::Pow(b, x) => bases.entry(*b).or_default().push(*x),
            other => bases.entry(other).or_default().push(Expr::one()),
        }
    }
    if coefficient == 0.0 {
        return Expr::zero();
    }
    let mut factors = Vec::with_capacity(bases.len());
    let mut regroup = false;
    for (base, exponents) in bases {
        let exponent = if exponents.len() == 1 {
            exponents.into_iter().next().unwrap()
        } else {
            add(exponents)
        };
        match pow(base, exponent) {
            Expr::Const(c) => coefficient *= c.get(),
            p @ Expr::Mul(_) => {
                regroup = true;
                factors.push(p);
            }
            p => factors.push(p),
        }
    }
    if regroup {
        factors.push(Expr::constant(coefficient));
        return mul(factors);
    }
    if coefficient == 0.0 {
        return Expr::zero();
    }
    factors.sort();
    if coefficient != 1.0 {
        factors.insert(0, Expr::constant(coefficient));
    }
    match factors.len() {
        0 => Expr::constant(coefficient),
        1 => factors.pop().unwrap(),
        _ => Expr::Mul(factors),
    }
}

/// Canonical power of canonical operands.
pub(crate) fn pow(base: Expr, exponent: Expr) -> Expr {
    if let Some(x) = exponent.as_const() {
        if x == 0.0 {
            return Expr::one();
        }
        if x == 1.0 {
            return base;
        }
    }
    if let Some(b) = base.as_const() {
        if b == 1.0 {
            return Expr::one();
        }
        if let Some(x) = exponent.as_const() {
            if b == 0.0 {
                if x > 0.0 {
                    return Expr::zero();
                }
            } else {
                let v = b.powf(x);
                if v.is_finite() {
                    return Expr::constant(v);
                }
            }
            return Expr::Pow(Box::new(base), Box::new(exponent));
        }
    }
    if let Some(n) = as_integer(&exponent) {
        match base {
            Expr::Pow(inner_base, inner_exp) => {
                let combined = mul(vec![*inner_exp, Expr::constant(n)]);
                return pow(*inner_base, combined);
            }
            Expr::Mul(factors) => {
                return mul(factors.into_iter().map(|f| pow(f, Expr::constant(n))).collect());
            }
            _ => {}
        }
    }
    Expr::Pow(Box::new(base), Box::new(exponent))
}

/// Canonical function application to a canonical argument.
pub(crate) fn func(f: Func, arg: Expr) -> Expr {
    if let Some(x) = arg.as_const() {
        if let Some(v) = f.apply(x) {
            return Expr::constant(v);
        }
    }
    if f == Func::Abs {
        if let Expr::Func(Func::Abs, _) = &arg {
            return arg;
        }
    }
    Expr::Func(f, Box::new(arg))
}

/// Multiplies out products of sums and small positive integer powers of sums,
/// returning a canonical tree.
///
/// Used by zero testing; falls back to the unexpanded canonical form when the
/// expansion would grow past a fixed term budget.
pub fn expand(e: &Expr) -> Expr {
    let c = canon(e);
    expand_canonical(&c).unwrap_or(c)
}

/// The smaller of the canonical and the expanded form.
pub fn tidy(e: &Expr) -> Expr {
    let c = canon(e);
    let x = expand(&c);
    if x.size() <= c.size() {
        x
    } else {
        c
    }
}

fn expand_canonical(e: &Expr) -> Option<Expr> {
    Some(match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Add(xs) => {
            let parts = xs.iter().map(expand_canonical).collect::<Option<Vec<_>>>()?;
            add(parts)
        }
        Expr::Mul(xs) => {
            let parts = xs.iter().map(expand_canonical).collect::<Option<Vec<_>>>()?;
            distribute(parts)?
        }
        Expr::Pow(b, x) => {
            let base = expand_canonical(b)?;
            let exponent = expand_canonical(x)?;
            match (&base, as_integer(&exponent)) {
                (Expr::Add(_), Some(n)) if n > 0.0 && n <= MAX_EXPAND_POWER => {
                    distribute(vec![base; n as usize])?
                }
                _ => pow(base, exponent),
            }
        }
        Expr::Func(f, a) => func(*f, expand_canonical(a)?),
        Expr::Neg(_) | Expr::Div(_, _) => expand_canonical(&canon(e))?,
    })
}

fn terms_of(e: Expr) -> Vec<Expr> {
    match e {
        Expr::Add(xs) => xs,
        other => vec![other],
    }
}

fn distribute(factors: Vec<Expr>) -> Option<Expr> {
    let mut acc: Vec<Expr> = vec![Expr::one()];
    for factor in factors {
        let terms = terms_of(factor);
        if acc.len() * terms.len() > MAX_EXPAND_TERMS {
            return None;
        }
        let mut next = Vec::with_capacity(acc.len() * terms.len());
        for a in &acc {
            for t in &terms {
                next.push(mul(vec![a.clone(), t.clone()]));
            }
        }
        acc = terms_of(add(next));
    }
    Some(add(acc))
}

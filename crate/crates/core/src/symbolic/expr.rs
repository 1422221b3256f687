use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

/// A real constant with a total order, so expression trees can be sorted and compared.
///
/// `-0.0` is normalized to `0.0` on construction.
#[derive(Debug, Clone, Copy)]
pub struct Real(f64);

impl Real {
    pub fn new(v: f64) -> Self {
        if v == 0.0 {
            Real(0.0)
        } else {
            Real(v)
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Real {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

/// Unary functions known to the expression grammar.
///
/// `Sign` never comes out of user text in practice; it is produced by differentiating `abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    /// Applies the function, returning `None` outside its real domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return None;
                }
                x.ln()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => {
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        v.is_finite().then_some(v)
    }
}

/// Symbolic expression over named real variables.
///
/// Trees are immutable values. The derived ordering (variant order first, then children)
/// is the canonical key used to sort the operands of sums and products, so two
/// canonical trees are mathematically identical under the simplifier's rules exactly
/// when they compare equal.
///
/// `Neg` and `Div` are produced by the parser; canonicalization rewrites them as
/// products with `-1` and negative powers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(Real),
    Var(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(Real::new(v))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(c.get()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    /// Canonical sum of the given terms.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        super::simplify::canon(&Expr::Add(terms))
    }

    /// Canonical product of the given factors.
    pub fn product(factors: Vec<Expr>) -> Expr {
        super::simplify::canon(&Expr::Mul(factors))
    }

    /// Canonical `base ^ exponent`.
    pub fn power(base: Expr, exponent: Expr) -> Expr {
        super::simplify::canon(&Expr::Pow(Box::new(base), Box::new(exponent)))
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        super::simplify::canon(&Expr::Func(func, Box::new(arg)))
    }

    pub fn neg(self) -> Expr {
        Expr::product(vec![Expr::constant(-1.0), self])
    }

    pub fn minus(self, other: Expr) -> Expr {
        Expr::sum(vec![self, other.neg()])
    }

    pub fn times(self, other: Expr) -> Expr {
        Expr::product(vec![self, other])
    }

    pub fn plus(self, other: Expr) -> Expr {
        Expr::sum(vec![self, other])
    }

    pub fn divide(self, other: Expr) -> Expr {
        Expr::product(vec![self, Expr::power(other, Expr::constant(-1.0))])
    }

    /// Names of all variables occurring in the tree.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Expr::Pow(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Func(_, a) => a.collect_vars(out),
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(|x| x.depends_on(name)),
            Expr::Pow(a, b) | Expr::Div(a, b) => a.depends_on(name) || b.depends_on(name),
            Expr::Neg(a) | Expr::Func(_, a) => a.depends_on(name),
        }
    }

    pub fn depends_on_any<S: AsRef<str>>(&self, names: &[S]) -> bool {
        names.iter().any(|n| self.depends_on(n.as_ref()))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(xs) | Expr::Mul(xs) => 1 + xs.iter().map(Expr::size).sum::<usize>(),
            Expr::Pow(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
            Expr::Neg(a) | Expr::Func(_, a) => 1 + a.size(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::render::render(self))
    }
}

use rand::Rng;

use super::eval::{evaluate, Bindings};
use super::expr::Expr;
use super::simplify::{canon, expand};

/// Points drawn by the numeric tier.
pub const NUMERIC_ZERO_POINTS: usize = 20;
/// Every sampled value must stay below this for a numeric-zero verdict.
pub const NUMERIC_ZERO_TOL: f64 = 1e-9;
/// Half-width of the sampling box used for every free variable.
const SAMPLE_RADIUS: f64 = 2.0;

/// Outcome of the two-tier "is identically zero" test.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroVerdict {
    /// Canonical form (possibly after expansion) is the constant 0.
    Symbolic,
    /// Not reduced symbolically, but vanished at every sampled point.
    Numeric,
    /// A sampled point gave a nonzero value; `witness` is the worst one seen.
    NonZero { witness: Option<(Bindings, f64)> },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        matches!(self, ZeroVerdict::Symbolic | ZeroVerdict::Numeric)
    }
}

/// True when the canonical or expanded form of `e` is the zero constant.
pub fn symbolically_zero(e: &Expr) -> bool {
    canon(e).is_zero() || expand(e).is_zero()
}

/// Symbolic check first, then [`NUMERIC_ZERO_POINTS`] random points with every
/// free variable uniform in `[-2, 2]`. Points outside the expression's domain are redrawn.
pub fn zero_test<R: Rng>(e: &Expr, rng: &mut R) -> ZeroVerdict {
    if symbolically_zero(e) {
        return ZeroVerdict::Symbolic;
    }
    let vars: Vec<String> = e.free_vars().into_iter().collect();
    let mut worst: Option<(Bindings, f64)> = None;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < NUMERIC_ZERO_POINTS && attempts < 40 * NUMERIC_ZERO_POINTS {
        attempts += 1;
        let b: Bindings = vars
            .iter()
            .map(|v| (v.clone(), rng.gen_range(-SAMPLE_RADIUS..SAMPLE_RADIUS)))
            .collect();
        let Ok(value) = evaluate(e, &b) else { continue };
        accepted += 1;
        if worst.as_ref().is_none_or(|(_, w)| value.abs() > w.abs()) {
            worst = Some((b, value));
        }
    }
    match worst {
        Some((_, v)) if accepted == NUMERIC_ZERO_POINTS && v.abs() < NUMERIC_ZERO_TOL => ZeroVerdict::Numeric,
        other => ZeroVerdict::NonZero { witness: other },
    }
}

use super::expr::{Expr, Func};
use super::simplify::canon;

/// Exact partial derivative of `e` with respect to `v`, in canonical form.
///
/// `abs` differentiates to `sign`, with `sign(0) = 0`.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    canon(&raw(&canon(e), v))
}

fn raw(e: &Expr, v: &str) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(name) => {
            if name == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(xs) => Expr::Add(xs.iter().map(|x| raw(x, v)).collect()),
        Expr::Mul(xs) => {
            let mut terms = Vec::with_capacity(xs.len());
            for (i, xi) in xs.iter().enumerate() {
                if !xi.depends_on(v) {
                    continue;
                }
                let mut factors = xs.clone();
                factors[i] = raw(xi, v);
                terms.push(Expr::Mul(factors));
            }
            Expr::Add(terms)
        }
        Expr::Pow(base, exponent) => {
            if !exponent.depends_on(v) {
                // n * b^(n-1) * b'
                let reduced = Expr::Add(vec![(**exponent).clone(), Expr::constant(-1.0)]);
                Expr::Mul(vec![
                    (**exponent).clone(),
                    Expr::Pow(base.clone(), Box::new(reduced)),
                    raw(base, v),
                ])
            } else {
                // b^x * (x' log b + x b'/b)
                Expr::Mul(vec![
                    e.clone(),
                    Expr::Add(vec![
                        Expr::Mul(vec![raw(exponent, v), Expr::Func(Func::Log, base.clone())]),
                        Expr::Mul(vec![
                            (**exponent).clone(),
                            raw(base, v),
                            Expr::Pow(base.clone(), Box::new(Expr::constant(-1.0))),
                        ]),
                    ]),
                ])
            }
        }
        Expr::Neg(a) => Expr::Neg(Box::new(raw(a, v))),
        Expr::Div(a, b) => raw(&canon(&Expr::Div(a.clone(), b.clone())), v),
        Expr::Func(f, a) => {
            let inner = raw(a, v);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => Expr::Pow(a.clone(), Box::new(Expr::constant(-1.0))),
                Func::Sin => Expr::Func(Func::Cos, a.clone()),
                Func::Cos => Expr::Neg(Box::new(Expr::Func(Func::Sin, a.clone()))),
                Func::Sqrt => Expr::Mul(vec![
                    Expr::constant(0.5),
                    Expr::Pow(Box::new(e.clone()), Box::new(Expr::constant(-1.0))),
                ]),
                Func::Abs => Expr::Func(Func::Sign, a.clone()),
                Func::Sign => Expr::zero(),
            };
            Expr::Mul(vec![outer, inner])
        }
    }
}

/// Gradient of `e` with respect to each name in `vars`.
pub fn gradient<S: AsRef<str>>(e: &Expr, vars: &[S]) -> Vec<Expr> {
    vars.iter().map(|v| differentiate(e, v.as_ref())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse;

    fn d(s: &str, v: &str) -> Expr {
        differentiate(&parse(s).unwrap(), v)
    }

    #[test]
    fn power_rule() {
        assert_eq!(d("u^2", "u"), parse("2*u").unwrap());
    }

    #[test]
    fn stationarity_of_basic_hamiltonian() {
        assert_eq!(d("psi0*u^2 + psi*u", "u"), parse("2*psi0*u + psi").unwrap());
    }

    #[test]
    fn shift_generator() {
        assert_eq!(d("x1 + s*t", "s"), parse("t").unwrap());
    }

    #[test]
    fn chain_rule_through_functions() {
        assert_eq!(d("exp(3*s)*x", "s"), parse("3*exp(3*s)*x").unwrap());
        assert_eq!(d("log(x)", "x"), parse("1/x").unwrap());
        assert_eq!(d("abs(x)", "x"), parse("sign(x)").unwrap());
        assert_eq!(d("sqrt(x)", "x"), parse("0.5/sqrt(x)").unwrap());
    }

    #[test]
    fn variable_exponent() {
        assert_eq!(d("2^x", "x"), parse("2^x*log(2)").unwrap());
    }

    #[test]
    fn other_variables_are_constants() {
        assert_eq!(d("x*y + y^2", "x"), parse("y").unwrap());
        assert!(d("y^2", "x").is_zero());
    }
}

use super::expr::Expr;

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Sum,
    Product,
    Atom,
}

/// Renders an expression in the input grammar. For canonical trees,
/// `parse(render(e)) == e`.
pub fn render(e: &Expr) -> String {
    render_at(e, Level::Sum)
}

fn number(v: f64) -> String {
    format!("{v}")
}

fn wrap(s: String, needed: bool) -> String {
    if needed {
        format!("({s})")
    } else {
        s
    }
}

fn negative_coefficient(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) if c.get() < 0.0 => Some(c.get()),
        Expr::Mul(xs) => xs.first().and_then(Expr::as_const).filter(|c| *c < 0.0),
        _ => None,
    }
}

/// The same term with its leading coefficient negated.
fn negated(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::constant(-c.get()),
        Expr::Mul(xs) => {
            let mut ys = xs.clone();
            let c = -ys[0].as_const().unwrap();
            if c == 1.0 {
                ys.remove(0);
            } else {
                ys[0] = Expr::constant(c);
            }
            if ys.len() == 1 {
                ys.pop().unwrap()
            } else {
                Expr::Mul(ys)
            }
        }
        other => other.clone(),
    }
}

fn render_at(e: &Expr, level: Level) -> String {
    match e {
        Expr::Const(c) => {
            let v = c.get();
            wrap(number(v), v < 0.0 && level == Level::Atom)
        }
        Expr::Var(v) => v.clone(),
        Expr::Func(f, a) => format!("{}({})", f.name(), render_at(a, Level::Sum)),
        Expr::Add(xs) => {
            let mut out = String::new();
            for (i, term) in xs.iter().enumerate() {
                if i == 0 {
                    out.push_str(&render_at(term, Level::Product));
                } else if negative_coefficient(term).is_some() {
                    out.push_str(" - ");
                    out.push_str(&render_at(&negated(term), Level::Product));
                } else {
                    out.push_str(" + ");
                    out.push_str(&render_at(term, Level::Product));
                }
            }
            wrap(out, level > Level::Sum)
        }
        Expr::Mul(xs) => wrap(render_product(xs), level == Level::Atom),
        Expr::Pow(b, x) => {
            let base = render_at(b, Level::Atom);
            let exponent = match x.as_const() {
                Some(v) => number(v),
                None => render_at(x, Level::Atom),
            };
            wrap(format!("{base}^{exponent}"), level == Level::Atom)
        }
        Expr::Neg(a) => wrap(format!("-{}", render_at(a, Level::Atom)), level == Level::Atom),
        Expr::Div(a, b) => wrap(
            format!("{}/{}", render_at(a, Level::Atom), render_at(b, Level::Atom)),
            level == Level::Atom,
        ),
    }
}

fn render_product(xs: &[Expr]) -> String {
    let mut coefficient = 1.0;
    let mut numerator = Vec::new();
    let mut atomic_numerator = true;
    let mut sum_numerator = false;
    let mut denominator = Vec::new();
    for x in xs {
        match x {
            Expr::Const(c) => coefficient *= c.get(),
            Expr::Pow(b, p) if p.as_const().is_some_and(|v| v < 0.0) => {
                let flipped = -p.as_const().unwrap();
                if flipped == 1.0 {
                    denominator.push(render_at(b, Level::Atom));
                } else {
                    denominator.push(format!("{}^{}", render_at(b, Level::Atom), number(flipped)));
                }
            }
            other => {
                atomic_numerator &= matches!(other, Expr::Var(_) | Expr::Func(..));
                sum_numerator = matches!(other, Expr::Add(_));
                numerator.push(render_at(other, Level::Product));
            }
        }
    }
    let mut out = String::new();
    if numerator.is_empty() {
        out.push_str(&number(coefficient));
    } else {
        if coefficient == -1.0 {
            let body = numerator.join("*");
            // a lone sum is already parenthesized
            if numerator.len() == 1 && (atomic_numerator || sum_numerator) {
                out.push('-');
                out.push_str(&body);
            } else {
                out.push_str(&format!("-({body})"));
            }
        } else {
            if coefficient != 1.0 {
                out.push_str(&number(coefficient));
                out.push('*');
            }
            out.push_str(&numerator.join("*"));
        }
    }
    for d in denominator {
        out.push('/');
        out.push_str(&d);
    }
    out
}

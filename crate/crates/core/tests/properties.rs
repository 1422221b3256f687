mod common;

use std::collections::HashMap;

use common::{load, random_expr};
use extremal_lab::conservation::poisson_bracket;
use extremal_lab::extremal::{integrate, Trajectory};
use extremal_lab::symbolic::{canon, differentiate, evaluate, expand, parse, substitute, zero_test, Bindings, Expr};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expr_in(vars: &'static [&'static str], depth: usize) -> impl Strategy<Value = String> {
    any::<u64>().prop_map(move |seed| random_expr(&mut ChaCha8Rng::seed_from_u64(seed), vars, depth))
}

fn bind(vars: &[&str], at: &[f64]) -> Bindings {
    vars.iter().map(|v| v.to_string()).zip(at.iter().copied()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

const XY: &[&str] = &["x", "y"];
const PHASE: &[&str] = &["x1", "x2", "psi1", "psi2", "t"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn derivative_matches_central_difference(text in expr_in(XY, 4), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = parse(&text).unwrap();
        let h = 1e-6;
        for (i, v) in XY.iter().enumerate() {
            let mut plus = [x, y];
            let mut minus = [x, y];
            plus[i] += h;
            minus[i] -= h;
            let fd = (evaluate(&e, &bind(XY, &plus)).unwrap() - evaluate(&e, &bind(XY, &minus)).unwrap()) / (2.0 * h);
            let sym = evaluate(&differentiate(&e, v), &bind(XY, &[x, y])).unwrap();
            prop_assert!(close(sym, fd, 1e-5), "{text} d/d{v}: {sym} vs {fd}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn canonical_form_is_idempotent(text in expr_in(XY, 4)) {
        let e = parse(&text).unwrap();
        let c = canon(&e);
        prop_assert_eq!(canon(&c), c.clone());
        let x = expand(&e);
        prop_assert_eq!(expand(&x), x);
    }

    #[test]
    fn rendering_round_trips(text in expr_in(XY, 4)) {
        let e = canon(&parse(&text).unwrap());
        let again = canon(&parse(&e.to_string()).unwrap());
        prop_assert_eq!(again, e);
    }

    #[test]
    fn canon_and_expand_preserve_values(text in expr_in(XY, 3), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = parse(&text).unwrap();
        let at = bind(XY, &[x, y]);
        let v = evaluate(&e, &at).unwrap();
        prop_assert!(close(evaluate(&canon(&e), &at).unwrap(), v, 1e-10));
        prop_assert!(close(evaluate(&expand(&e), &at).unwrap(), v, 1e-9));
    }

    #[test]
    fn differentiation_is_linear(f in expr_in(XY, 3), g in expr_in(XY, 3), a in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let (f, g) = (parse(&f).unwrap(), parse(&g).unwrap());
        let combo = Expr::constant(a).times(f.clone()).plus(g.clone());
        let lhs = differentiate(&combo, "x");
        let rhs = Expr::constant(a).times(differentiate(&f, "x")).plus(differentiate(&g, "x"));
        let at = bind(XY, &[x, y]);
        prop_assert!(close(evaluate(&lhs, &at).unwrap(), evaluate(&rhs, &at).unwrap(), 1e-9));
    }

    #[test]
    fn identity_substitution_is_a_no_op(text in expr_in(XY, 4)) {
        let e = parse(&text).unwrap();
        let id: HashMap<String, Expr> = XY.iter().map(|v| (v.to_string(), Expr::var(*v))).collect();
        prop_assert_eq!(substitute(&e, &id), canon(&e));
    }

    #[test]
    fn substitution_commutes_with_evaluation(text in expr_in(XY, 3), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = parse(&text).unwrap();
        let s = substitute(&e, &HashMap::from([("x".to_string(), parse("y^2 - 0.5").unwrap())]));
        let direct = evaluate(&e, &bind(XY, &[y * y - 0.5, y])).unwrap();
        prop_assert!(close(evaluate(&s, &bind(XY, &[x, y])).unwrap(), direct, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn bracket_is_antisymmetric(f in expr_in(PHASE, 3), g in expr_in(PHASE, 3), seed in any::<u64>()) {
        let (f, g) = (parse(&f).unwrap(), parse(&g).unwrap());
        let s = ["x1", "x2"];
        let sum = poisson_bracket(&f, &g, &s).plus(poisson_bracket(&g, &f, &s));
        prop_assert!(zero_test(&sum, &mut ChaCha8Rng::seed_from_u64(seed)).is_zero());
    }

    #[test]
    fn bracket_obeys_leibniz(f in expr_in(PHASE, 2), g in expr_in(PHASE, 2), h in expr_in(PHASE, 2), seed in any::<u64>()) {
        let (f, g, h) = (parse(&f).unwrap(), parse(&g).unwrap(), parse(&h).unwrap());
        let s = ["x1", "x2"];
        let r = poisson_bracket(&f.clone().times(g.clone()), &h, &s)
            .minus(f.clone().times(poisson_bracket(&g, &h, &s)))
            .minus(g.clone().times(poisson_bracket(&f, &h, &s)));
        prop_assert!(zero_test(&r, &mut ChaCha8Rng::seed_from_u64(seed)).is_zero());
    }

    #[test]
    fn bracket_with_itself_vanishes(f in expr_in(PHASE, 3), seed in any::<u64>()) {
        let f = parse(&f).unwrap();
        prop_assert!(zero_test(&poisson_bracket(&f, &f, &["x1", "x2"]), &mut ChaCha8Rng::seed_from_u64(seed)).is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    /// RK4 on the oscillator `x'' = x`: global error falls by at least 8 per halving.
    #[test]
    fn rk4_is_fourth_order(psi_a in 0.5f64..3.0) {
        let p = load("oscillator.prob");
        // psi' = 2 psi0 x ... gives x = A sinh t + B cosh t with x(0)=0, x'(0) = psi(0)/2
        let exact = psi_a / 2.0 * 1f64.sinh();
        let err = |n: usize| (integrate(&p, &[0.0], &[psi_a], n).unwrap().x[n][0] - exact).abs();
        let (e1, e2, e3) = (err(16), err(32), err(64));
        prop_assert!(e1 / e2 >= 8.0 && e2 / e3 >= 8.0, "{e1:e} {e2:e} {e3:e}");
    }

    #[test]
    fn trajectory_csv_round_trips(psi_a in -2.0f64..2.0, steps in 16usize..64) {
        let p = load("oscillator.prob");
        let tr = integrate(&p, &[0.0], &[psi_a], steps).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice(), &p).unwrap();
        prop_assert_eq!(&back.grid, &tr.grid);
        prop_assert_eq!(&back.x, &tr.x);
        prop_assert_eq!(&back.psi, &tr.psi);
        prop_assert_eq!(&back.u, &tr.u);
    }
}

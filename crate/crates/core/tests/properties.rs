use confsym::conformable::{conf_diff_numeric, conf_diff_symbolic, ConfCalcConfig};
use confsym::expr::{diff, eval, parse, simplify, EvalEnv, Expr, Func, Node, Symbol, ZeroTest};
use confsym::ode::{integrate_ivp, residual_of_ode, s_substitute, to_s, CanonicalOde, OdeKind};
use confsym::reductions::{pipeline, ReductionParams};
use confsym::verifier::{lift_pipeline, pde_residual, ConfigEcho, GridSpec};
use proptest::prelude::*;

fn sym(n: &str) -> Symbol {
    Symbol::new(n).unwrap()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::sym("t")),
        Just(Expr::sym("x")),
        Just(Expr::sym("u")),
        (-5i64..6).prop_map(Expr::int),
        (1i64..5, 2i64..7).prop_map(|(n, d)| Expr::rat(n, d)),
        Just(Expr::apply(Func::Ln, Expr::sym("t"))),
        Just(Expr::apply(Func::Sqrt, Expr::sym("x"))),
    ]
}

fn divides_by_zero(e: &Expr) -> bool {
    match e.node() {
        Node::Pow(b, x) if b.is_zero() && x.is_negative_number() => true,
        _ => e.children().into_iter().any(divides_by_zero),
    }
}

fn expr() -> impl Strategy<Value = Expr> {
    raw_expr().prop_filter("division by zero", |e| !divides_by_zero(&simplify(e)))
}

fn raw_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), -2i64..4).prop_map(|(a, n)| a.powi(n)),
            inner.clone().prop_map(|a| Expr::apply(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::apply(Func::Cos, a)),
            inner.prop_map(|a| Expr::apply(Func::Exp, a / Expr::int(4))),
        ]
    })
}

fn env(t: f64, x: f64, u: f64) -> EvalEnv {
    EvalEnv::new().with("t", t).with("x", x).with("u", u)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printing_round_trips(e in expr()) {
        let e = simplify(&e);
        let text = e.to_string();
        let back = simplify(&parse(&text).unwrap());
        prop_assert_eq!(&back, &e, "{}", text);
    }

    #[test]
    fn simplify_preserves_values(e in expr(), t in 0.3f64..2.5, x in 0.3f64..2.5, u in -2.0f64..2.0) {
        let raw = parse(&e.to_string()).unwrap();
        let s = simplify(&raw);
        if let (Ok(a), Ok(b)) = (eval(&raw, &env(t, x, u)), eval(&s, &env(t, x, u))) {
            if a.is_finite() && a.abs() < 1e8 {
                prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn diff_is_linear(f in expr(), g in expr(), a in -3i64..4, b in -3i64..4) {
        let t = sym("t");
        let lhs = diff(&(Expr::int(a) * &f + Expr::int(b) * &g), &t);
        let rhs = Expr::int(a) * diff(&f, &t) + Expr::int(b) * diff(&g, &t);
        prop_assert!(ZeroTest::default().is_zero(&(lhs - rhs)));
    }

    #[test]
    fn zero_test_is_sound(e in expr(), c in 1i64..50) {
        let z = ZeroTest::default();
        prop_assert!(z.is_zero(&(e.clone() - simplify(&parse(&e.to_string()).unwrap()))));
        let shifted = &e - &e + Expr::rat(c, 1000);
        prop_assert!(!z.is_zero(&shifted));
    }

    #[test]
    fn conformable_power_rule(alpha in 0.3f64..1.0, p in -1.5f64..3.0, t in 0.4f64..2.5) {
        let v = conf_diff_numeric(|s: f64| Some(s.powf(p)), t, alpha, &ConfCalcConfig::default()).unwrap();
        prop_assert!(close(v, p * t.powf(p - alpha), 1e-6));
    }

    #[test]
    fn conformable_of_constant_vanishes(alpha in 0.3f64..1.0, c in -5.0f64..5.0, t in 0.4f64..2.5) {
        let v = conf_diff_numeric(|_| Some(c), t, alpha, &ConfCalcConfig::default()).unwrap();
        prop_assert!(v.abs() < 1e-9);
    }

    #[test]
    fn conformable_symbolic_matches_numeric(e in expr(), alpha in 0.3f64..1.0, t in 0.4f64..2.5, x in 0.4f64..2.5) {
        let tt = sym("t");
        let order = Expr::num(confsym::expr::Rational::from_float(alpha).unwrap());
        let d = conf_diff_symbolic(&e, &tt, &order);
        let f = |s: f64| eval(&e, &env(s, x, 0.5)).ok().filter(|v| v.is_finite());
        let (Some(f0), Ok(sym_v)) = (f(t), eval(&d, &env(t, x, 0.5))) else { return Ok(()) };
        if f0.abs() > 1e4 || !sym_v.is_finite() || sym_v.abs() > 1e4 {
            return Ok(());
        }
        if let Ok(num_v) = conf_diff_numeric(f, t, alpha, &ConfCalcConfig::default()) {
            prop_assert!(close(sym_v, num_v, 1e-5), "{} vs {}", sym_v, num_v);
        }
    }
}

fn fp2(gamma: f64) -> CanonicalOde {
    s_substitute(
        &CanonicalOde::new(
            OdeKind::FpII,
            "Phi",
            "omega",
            simplify(&parse("Phi_2 - 2*Phi^3 - omega^alpha/alpha*Phi - gamma").unwrap()),
            EvalEnv::new().with("alpha", 0.7).with("gamma", gamma),
        )
        .fractional(),
    )
}

/// Halving the tolerance must not make the solution worse by more than a
/// factor 4; errors below 1e-13 are treated as the floor.
#[test]
fn tolerance_scaling_on_fp2() {
    let ode = fp2(1.0);
    let reference = integrate_ivp(&ode, &[0.1, 0.0], 1e-3, (1e-3, 1.5), 1e-14).unwrap();
    let pts: Vec<f64> = (1..60).map(|i| 1.5 * i as f64 / 60.0).collect();
    let err = |tol: f64| {
        let sol = integrate_ivp(&ode, &[0.1, 0.0], 1e-3, (1e-3, 1.5), tol).unwrap();
        let res = residual_of_ode(&ode, &sol, 200).unwrap().max_abs;
        let glob = pts
            .iter()
            .map(|&s| (sol.eval(s, 0).unwrap() - reference.eval(s, 0).unwrap()).abs())
            .fold(0.0f64, f64::max);
        (res, glob)
    };
    let floor = 1e-13;
    let mut prev = err(1e-6);
    for k in 1..8 {
        let cur = err(1e-6 / 2f64.powi(k));
        assert!(cur.0 <= 4.0 * prev.0.max(floor), "residual {:?} -> {:?}", prev, cur);
        assert!(cur.1 <= 4.0 * prev.1.max(floor), "error {:?} -> {:?}", prev, cur);
        prev = cur;
    }
}

/// A conformable derivative in `ω` equals `d/ds` after `s = ω^α/α`.
#[test]
fn s_substitution_matches_conformable_numerics() {
    let cfg = ConfCalcConfig::default();
    for alpha in [0.5, 0.7] {
        for g in [|s: f64| s.sin(), |s: f64| (0.3 * s).exp(), |s: f64| s * s * s - s] {
            let dg = |s: f64| (g(s + 1e-5) - g(s - 1e-5)) / 2e-5;
            for i in 1..20 {
                let w = 0.2 + 0.1 * i as f64;
                let conf = conf_diff_numeric(|v: f64| Some(g(to_s(v, alpha))), w, alpha, &cfg).unwrap();
                assert!(close(conf, dg(to_s(w, alpha)), 1e-7), "alpha={alpha} w={w}");
            }
        }
    }
}

#[test]
fn residual_monotone_in_tolerance_and_grid() {
    let rp = ReductionParams::default();
    let floor = 1e-12;
    for key in ["mkdv/V3", "burgers/V4", "burgers/V3+muV1", "kdv/V3+aV1"] {
        let pl = pipeline(key, &rp).unwrap();
        let r = |tol: f64, n: usize| {
            let grid = GridSpec { nt: n, nx: n, ..GridSpec::default() };
            let g = lift_pipeline(&pl, &grid, tol).unwrap();
            pde_residual(&pl.spec, &g, ConfigEcho { tolerance: 1e-7, ..ConfigEcho::default() }).unwrap().max_abs
        };
        let coarse = r(1e-9, 50);
        let fine = r(1e-10, 50);
        assert!(fine <= 2.0 * coarse.max(floor), "{key}: {coarse} -> {fine}");
        let big = r(1e-10, 100);
        assert!(big <= 10.0 * fine.max(floor) && fine <= 10.0 * big.max(floor), "{key}: {fine} vs {big}");
    }
}

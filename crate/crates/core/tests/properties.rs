use proptest::prelude::*;
use sconvex::defcheck::{self, Definition, ModifierMap};
use sconvex::expr::{central_gradient, differentiate, BinaryOp, EvalPoint, NaryOp, UnaryOp};
use sconvex::gradineq::{limit_theta_over_sigma, LimitValue};
use sconvex::report::{Tolerance, Verdict};
use sconvex::sampling::{sample_pairs, BoxDomain, SamplePlan};
use sconvex::{parse, Expr};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec![0.5, 1.0, 2.0, 3.25, -1.5, -4.0, 1e-7, 2.5e20])
            .prop_map(Expr::Const),
        (0usize..3).prop_map(Expr::Var),
        Just(Expr::Sigma),
    ]
}

fn any_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            inner
                .clone()
                .prop_filter("negated constants parse as constants", |e| !matches!(e, Expr::Const(_)))
                .prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![UnaryOp::Abs, UnaryOp::Exp, UnaryOp::Log, UnaryOp::Sqrt]),
                inner.clone()
            )
                .prop_map(|(op, e)| Expr::Unary(op, Box::new(e))),
            (
                prop::sample::select(vec![
                    BinaryOp::Add,
                    BinaryOp::Sub,
                    BinaryOp::Mul,
                    BinaryOp::Div,
                    BinaryOp::Pow
                ]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (
                prop::sample::select(vec![NaryOp::Max, NaryOp::Min]),
                prop::collection::vec(inner, 2..4)
            )
                .prop_map(|(op, args)| Expr::Nary(op, args)),
        ]
    })
}

/// Smooth expressions in `x1, x2` built from operations that stay defined
/// on `[0.5, 2]^2`.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::Const),
        (0usize..2).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Exp, Expr::mul(Expr::Const(0.3), a))),
            inner.clone().prop_map(|a| Expr::pow(a, Expr::Const(2.0))),
            // arguments kept positive
            inner
                .clone()
                .prop_map(|a| Expr::unary(UnaryOp::Log, Expr::add(Expr::pow(a, Expr::Const(2.0)), Expr::Const(1.0)))),
            inner.prop_map(|a| Expr::unary(UnaryOp::Sqrt, Expr::add(Expr::pow(a, Expr::Const(2.0)), Expr::Const(1.0)))),
        ]
    })
}

fn quadratic_instance() -> impl Strategy<Value = (String, String, f64)> {
    (0.1f64..3.0, -1.0f64..1.0, 0.0f64..2.0, -1.0f64..2.0, prop::sample::select(vec![0.5, 0.75, 1.0]))
        .prop_map(|(a, c, e, k, s)| (format!("{a}*(x1-({c}))^2+{e}"), format!("({k})*sigma"), s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_expressions_parse_back(e in any_expr()) {
        let text = e.to_string();
        let back = parse(&text, 3).unwrap();
        prop_assert_eq!(&back, &e, "text {}", text);
    }

    #[test]
    fn evaluation_is_deterministic(e in any_expr(), x in prop::collection::vec(-3.0f64..3.0, 3), sg in 0.0f64..1.0) {
        let p = EvalPoint::with_sigma(&x, sg);
        let a = e.eval(&p);
        let b = e.eval(&p);
        match (a, b) {
            (Ok(u), Ok(v)) => prop_assert_eq!(u.to_bits(), v.to_bits()),
            (Err(u), Err(v)) => prop_assert_eq!(u, v),
            _ => prop_assert!(false),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symbolic_derivative_matches_central_difference(
        e in smooth_expr(),
        x in prop::collection::vec(0.5f64..2.0, 2),
    ) {
        let p = EvalPoint::new(&x);
        let fd = central_gradient(&e, &p).unwrap();
        let scale = e.eval(&p).unwrap().abs().max(1.0);
        for (i, numeric) in fd.iter().enumerate() {
            let d = differentiate(&e, i).unwrap();
            let exact = d.eval(&p).unwrap();
            let gap = (exact - numeric).abs() / exact.abs().max(scale);
            prop_assert!(gap < 1e-5, "{}: d/dx{} = {} vs {}", e, i + 1, exact, numeric);
        }
    }

    #[test]
    fn samples_stay_in_the_domain(
        lo in prop::collection::vec(-5.0f64..0.0, 1..4),
        width in 0.1f64..5.0,
        pairs in 1usize..200,
        seed in any::<u64>(),
    ) {
        let hi: Vec<f64> = lo.iter().map(|l| l + width).collect();
        let structural = 1 + (1usize << lo.len());
        let d = BoxDomain::new(lo, hi).unwrap();
        let plan = SamplePlan::new(0.5, seed).unwrap().with_pairs(pairs);
        let a = sample_pairs(&d, &plan).unwrap();
        prop_assert_eq!(a.len(), pairs.max(structural));
        for (b1, b2) in &a {
            prop_assert!(d.contains(b1) && d.contains(b2));
        }
        prop_assert_eq!(&a, &sample_pairs(&d, &plan).unwrap());
    }

    #[test]
    fn limit_of_sigma_times_function_is_exact(
        c in -5.0f64..5.0,
        k in 0.1f64..4.0,
        b in -2.0f64..2.0,
    ) {
        let theta = ModifierMap::one_point(parse(&format!("sigma*(({c}) + {k}*x1^2)"), 1).unwrap());
        let est = limit_theta_over_sigma(&theta, &[b]).unwrap();
        let want = c + k * b * b;
        match est.value {
            LimitValue::Converged(v) => prop_assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", v, want),
            LimitValue::Divergent => prop_assert!(false, "divergent"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn larger_slack_never_refutes_a_certified_instance(
        (h, theta, s) in quadratic_instance(),
        seed in any::<u64>(),
        extra in 0.0f64..1e-3,
    ) {
        let h = sconvex::parse_with_s(&h, 1, s).unwrap();
        let theta = ModifierMap::one_point(parse(&theta, 1).unwrap());
        let d = BoxDomain::interval(-2.0, 2.0).unwrap();
        let plan = SamplePlan::new(s, seed).unwrap().with_pairs(48);
        let tight = Tolerance::default();
        let loose = Tolerance::new(tight.abs + extra, tight.rel + extra);
        let a = defcheck::check_general_s_convex(&h, &theta, &d, &plan, &tight).unwrap();
        let b = defcheck::check_general_s_convex(&h, &theta, &d, &plan, &loose).unwrap();
        if a.verdict == Verdict::CertifiedOnSamples {
            prop_assert_eq!(b.verdict, Verdict::CertifiedOnSamples);
        }
        prop_assert!(b.n_violations <= a.n_violations);
    }

    #[test]
    fn reports_do_not_depend_on_thread_count(
        (h, theta, s) in quadratic_instance(),
        seed in any::<u64>(),
    ) {
        let h = sconvex::parse_with_s(&h, 1, s).unwrap();
        let theta = ModifierMap::one_point(parse(&theta, 1).unwrap());
        let d = BoxDomain::interval(-2.0, 2.0).unwrap();
        let plan = SamplePlan::new(s, seed).unwrap().with_pairs(64);
        let tol = Tolerance::default();
        let many = defcheck::check_general_s_convex(&h, &theta, &d, &plan, &tol).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| defcheck::check_general_s_convex(&h, &theta, &d, &plan, &tol).unwrap());
        prop_assert_eq!(many, one);
    }

    #[test]
    fn margins_scale_with_positive_factor(
        (h, theta, s) in quadratic_instance(),
        alpha in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let h1 = sconvex::parse_with_s(&h, 1, s).unwrap();
        let t1 = ModifierMap::one_point(parse(&theta, 1).unwrap());
        let h2 = sconvex::parse_with_s(&format!("{alpha}*({h})"), 1, s).unwrap();
        let t2 = ModifierMap::one_point(parse(&format!("{alpha}*({theta})"), 1).unwrap());
        let d = BoxDomain::interval(-2.0, 2.0).unwrap();
        let plan = SamplePlan::new(s, seed).unwrap().with_pairs(32);
        let tol = Tolerance::default();
        let a = defcheck::sample_records(Definition::GeneralSConvex { h: &h1, theta: &t1 }, &d, &plan, &tol, false).unwrap();
        let b = defcheck::sample_records(Definition::GeneralSConvex { h: &h2, theta: &t2 }, &d, &plan, &tol, false).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            let scale = (alpha * x.rhs).abs().max(alpha * x.lhs.abs()).max(1.0);
            prop_assert!((y.margin - alpha * x.margin).abs() <= 1e-9 * scale, "{} vs {}", y.margin, alpha * x.margin);
        }
    }
}

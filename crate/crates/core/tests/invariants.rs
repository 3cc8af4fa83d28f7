//! Property tests: jets against finite differences, expression round-trips,
//! and independence of the invariants from the spanning frame of each block.

use mixscal::expr::parse_expression;
use mixscal::runner::{build_model, RunConfig};
use proptest::prelude::*;

const COORDS: [&str; 3] = ["x0", "x1", "x2"];

/// Smooth expressions in three variables (no division or log, so no poles).
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(|i| format!("x{i}")),
        (-2.0f64..2.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*sin({a}))")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 3)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_gradient_matches_central_differences(s in smooth_expr(), p in point()) {
        let e = parse_expression(&s, &COORDS).unwrap();
        let j = e.eval_jet(&p, 1).unwrap();
        prop_assert!(close(j.value(), e.eval(&p).unwrap(), 1e-14));
        let h = 1e-5;
        for v in 0..3 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[v] += h;
            b[v] -= h;
            let fd = (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h);
            let mut alpha = [0u8; 3];
            alpha[v] = 1;
            prop_assert!(close(j.partial(&alpha), fd, 1e-6), "{s}: d{v} jet {} fd {fd}", j.partial(&alpha));
        }
    }

    #[test]
    fn jet_hessian_matches_differences_of_gradients(s in smooth_expr(), p in point()) {
        let e = parse_expression(&s, &COORDS).unwrap();
        let j = e.eval_jet(&p, 2).unwrap();
        let h = 1e-5;
        for v in 0..3 {
            for w in 0..3 {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[w] += h;
                b[w] -= h;
                let mut dv = [0u8; 3];
                dv[v] = 1;
                let fd = (e.eval_jet(&a, 1).unwrap().partial(&dv) - e.eval_jet(&b, 1).unwrap().partial(&dv)) / (2.0 * h);
                let mut alpha = [0u8; 3];
                alpha[v] += 1;
                alpha[w] += 1;
                prop_assert!(close(j.partial(&alpha), fd, 1e-5), "{s}: d{v}d{w}");
            }
        }
    }

    #[test]
    fn jet_product_and_quotient_rules(f in smooth_expr(), g in smooth_expr(), p in point()) {
        let a = parse_expression(&f, &COORDS).unwrap().eval_jet(&p, 2).unwrap();
        let b = parse_expression(&g, &COORDS).unwrap().eval_jet(&p, 2).unwrap();
        let prod = &a * &b;
        for v in 0..3 {
            let lhs = prod.derivative(v);
            let rhs = &(&a.derivative(v) * &b.truncate(1)) + &(&a.truncate(1) * &b.derivative(v));
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!(close(*x, *y, 1e-12));
            }
        }
        let d = &b * &b + 1.0_f64.into_jet(&b);
        let back = &(&prod / &d) * &d;
        for (x, y) in back.coeffs().iter().zip(prod.coeffs()) {
            prop_assert!(close(*x, *y, 1e-10));
        }
    }

    #[test]
    fn printed_expressions_parse_back_identically(s in smooth_expr(), p in point()) {
        let e = parse_expression(&s, &COORDS).unwrap();
        let printed = e.to_string();
        let again = parse_expression(&printed, &COORDS).unwrap();
        prop_assert_eq!(&again, &e, "{} printed as {}", s, printed);
        prop_assert_eq!(again.to_string(), printed);
        prop_assert_eq!(again.eval(&p).unwrap().to_bits(), e.eval(&p).unwrap().to_bits());
    }
}

trait IntoJet {
    fn into_jet(self, like: &mixscal::jet::Jet) -> mixscal::jet::Jet;
}

impl IntoJet for f64 {
    fn into_jet(self, like: &mixscal::jet::Jet) -> mixscal::jet::Jet {
        mixscal::jet::Jet::constant(like.dim(), like.order(), self)
    }
}

/// Twisted metric on T⁴ with blocks {x0}, {x1, x2}, {x3}, either as coordinate
/// blocks or spanned by the given (rotated, rescaled) fields.
fn twisted_config(blocks: Option<(f64, f64, f64, f64)>) -> String {
    let u = "(2+cos(x0)+0.3*sin(x1)*cos(x2))";
    let v = "(1.5+0.4*sin(x0+x3)+0.2*cos(x1))";
    let split = match blocks {
        None => "partition = [1, 2, 1]".to_string(),
        Some((a, b, s, t)) => {
            let th = format!("({a}*x2+{b}*x1)");
            format!(
                "blocks = [[[\"1\",\"0\",\"0\",\"0\"]], \
                 [[\"0\",\"{s}*cos{th}\",\"{s}*sin{th}\",\"0\"], [\"0\",\"-sin{th}+0.5*cos{th}\",\"cos{th}+0.5*sin{th}\",\"0\"]], \
                 [[\"0\",\"0\",\"0\",\"{t}\"]]]"
            )
        }
    };
    format!(
        r#"
[model]
name = "custom"
coords = ["x0", "x1", "x2", "x3"]
metric = [["1","0","0","0"], ["0","{u}^2","0","0"], ["0","0","{u}^2","0"], ["0","0","0","{v}^2"]]
{split}
periods = [[0, 6.283185307179586], [0, 6.283185307179586], [0, 6.283185307179586], [0, 6.283185307179586]]
"#
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_do_not_depend_on_block_frames(
        a in -1.0f64..1.0, b in -1.0f64..1.0, s in 0.5f64..2.0, t in 0.5f64..2.0,
        p in prop::collection::vec(0.0f64..6.28, 4),
    ) {
        let build = |blocks| {
            let cfg = RunConfig::from_toml(&twisted_config(blocks)).unwrap();
            build_model(&cfg.model, None).unwrap()
        };
        let coord = build(None).at(&p, 2).unwrap();
        let framed = build(Some((a, b, s, t))).at(&p, 2).unwrap();
        let (m1, m2) = (coord.mixed_scalar(), framed.mixed_scalar());
        prop_assert!(close(m1.total, m2.total, 1e-10));
        for i in 0..3 {
            prop_assert!(close(m1.per_block[i], m2.per_block[i], 1e-10));
            prop_assert!(close(coord.q_function(i), framed.q_function(i), 1e-10));
            let (q1, q2) = (coord.quadratic_invariants(i), framed.quadratic_invariants(i));
            for (x, y) in [(q1.hh, q2.hh), (q1.tt, q2.tt), (q1.hh_perp, q2.hh_perp), (q1.tt_perp, q2.tt_perp)] {
                prop_assert!(close(x, y, 1e-10));
            }
            for j in 0..3 {
                prop_assert!(close(m1.pairs[i][j], m2.pairs[i][j], 1e-10));
            }
        }
    }
}

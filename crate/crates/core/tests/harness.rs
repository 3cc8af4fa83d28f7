use std::f64::consts::PI;

use mixscal::connections::Contorsion;
use mixscal::expr::{parse_expression, Expr};
use mixscal::geometry::{MetricField, VectorFieldDef};
use mixscal::harness::{
    divergence_theorem_check, divergence_theorem_check_with, integral_formula_check, integrate,
    mean_curvature_sum, negative_control, pairwise_sum, splitting_hypothesis_report, GridSpec,
    IntegralKind,
};
use mixscal::models::ModelSpec;

fn ex(s: &str, n: usize) -> Expr {
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let c: Vec<&str> = names.iter().map(String::as_str).collect();
    parse_expression(s, &c).unwrap()
}

fn warped3() -> ModelSpec {
    ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 3), ex("1.5+0.5*sin(2*x0)", 3)]).unwrap()
}

fn twisted3() -> ModelSpec {
    ModelSpec::multiply_twisted_torus(1, vec![ex("2+0.5*cos(x0)*cos(x1)", 3), ex("1.5+0.3*sin(x0+x2)", 3)])
        .unwrap()
}

fn statistical_cubic(n: usize) -> Contorsion {
    let mut c = vec![Expr::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = [i, j, k];
                s.sort();
                let e = ex(&format!("0.2*sin(x{}+{})+0.1", (s[0] + s[2]) % n, s[1] + 1), n);
                c[(i * n + j) * n + k] = e;
            }
        }
    }
    Contorsion::statistical(n, c).unwrap()
}

#[test]
fn grid_rejects_coarse_or_open() {
    assert!(GridSpec::new(vec![4], vec![0.0], vec![1.0]).is_err());
    assert!(GridSpec::for_model(&ModelSpec::sphere_chart(1.0).unwrap(), 16).is_err());
    let g = GridSpec::for_model(&warped3(), 8).unwrap();
    assert_eq!(g.len(), 512);
    assert_eq!(g.point(1), vec![0.0, 0.0, 2.0 * PI / 8.0]);
}

#[test]
fn pairwise_sum_is_deterministic_and_accurate() {
    let v: Vec<f64> = (0..10_000).map(|i| 0.1 + 1e-9 * i as f64).collect();
    let s = pairwise_sum(&v);
    assert!((s - (1000.0 + 1e-9 * 4999.5 * 10_000.0)).abs() < 1e-9);
    assert_eq!(s.to_bits(), pairwise_sum(&v).to_bits());
}

#[test]
fn constant_and_trig_integrals() {
    let m = ModelSpec::flat_torus(&[1, 1]).unwrap();
    let g = GridSpec::for_model(&m, 32).unwrap();
    let v = integrate(&m.metric, &g, |_| Ok(1.0)).unwrap();
    assert!((v - 4.0 * PI * PI).abs() < 1e-12);
    let s = integrate(&m.metric, &g, |p| Ok(p[0].sin() * p[1].cos() + (3.0 * p[0]).cos())).unwrap();
    assert!(s.abs() < 1e-12);
}

#[test]
fn warped_volume_matches_product_quadrature() {
    let m = warped3();
    let g = GridSpec::for_model(&m, 16).unwrap();
    let v = integrate(&m.metric, &g, |_| Ok(1.0)).unwrap();
    // ∫ (2+cos x)(1.5+0.5 sin 2x) dx = 2π·3, times (2π)².
    let expect = 6.0 * PI * 4.0 * PI * PI;
    assert!((v - expect).abs() < 1e-10 * expect, "{v} vs {expect}");
}

#[test]
fn divergence_theorem_holds_and_negative_control_fails() {
    let m = twisted3();
    let g = GridSpec::for_model(&m, 16).unwrap();
    let x = VectorFieldDef::new(vec![ex("sin(x1)*cos(x0)", 3), ex("cos(x2)", 3), ex("sin(x0)", 3)]);
    let c = divergence_theorem_check(&m, &g, &x, 1e-10).unwrap();
    assert!(c.pass, "{c:?}");
    // x0 is not periodic, so Div ∂_0 integrates to a boundary term.
    let bad = VectorFieldDef::new(vec![ex("x0", 3), Expr::zero(), Expr::zero()]);
    let c = divergence_theorem_check(&m, &g, &bad, 1e-10).unwrap();
    assert!(!c.pass, "{c:?}");
}

#[test]
fn mixed_scalar_formula_on_closed_models() {
    for m in [warped3(), twisted3()] {
        let g = GridSpec::for_model(&m, 16).unwrap();
        let r = integral_formula_check(IntegralKind::MixedScalar, &m, &g, 1e-7, None).unwrap();
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
    }
}

#[test]
fn metric_affine_and_statistical_formulas() {
    let m = twisted3().with_contorsion(statistical_cubic(3)).unwrap();
    let g = GridSpec::for_model(&m, 16).unwrap();
    for kind in [IntegralKind::MetricAffine, IntegralKind::Statistical] {
        let r = integral_formula_check(kind, &m, &g, 1e-7, None).unwrap();
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
    }
    let semi = twisted3()
        .with_contorsion(Contorsion::semi_symmetric(VectorFieldDef::new(vec![
            ex("0.3*sin(x1)", 3),
            ex("0.2", 3),
            ex("0.1*cos(x0)", 3),
        ])))
        .unwrap();
    let r = integral_formula_check(IntegralKind::MetricAffine, &semi, &g, 1e-7, None).unwrap();
    assert!(r.all_pass(), "{r:?}");
    assert!(integral_formula_check(IntegralKind::Statistical, &semi, &g, 1e-7, None).is_err());
}

#[test]
fn sigma_two_formulas() {
    let m = ModelSpec::multiply_twisted_torus(1, vec![ex("2+0.5*cos(x0)*cos(x1)", 3), ex("1.5+0.3*sin(x0+x2)", 3)])
        .unwrap();
    let g = GridSpec::for_model(&m, 16).unwrap();
    for kind in [IntegralKind::SigmaTwoTotal, IntegralKind::SigmaTwo { block: 0 }, IntegralKind::SigmaTwo { block: 2 }] {
        let r = integral_formula_check(kind, &m, &g, 1e-7, None).unwrap();
        assert!(r.all_pass(), "{kind:?}: {r:?}");
    }
}

#[test]
fn convergence_pairs_are_recorded() {
    let m = warped3();
    let g = GridSpec::for_model(&m, 16).unwrap();
    let r = integral_formula_check(IntegralKind::MixedScalar, &m, &g, 1e-7, Some(1e-12)).unwrap();
    assert_eq!(r.convergence.len(), 1);
    assert!(r.convergence[0].pairs.len() >= 2);
    assert_eq!(r.convergence[0].pairs[0].0, 8);
}

#[test]
fn flat_torus_satisfies_splitting_hypotheses() {
    let m = ModelSpec::flat_torus(&[1, 2]).unwrap();
    let g = GridSpec::for_model(&m, 8).unwrap();
    let h = splitting_hypothesis_report(&m, &g, 1e-9).unwrap();
    assert!(h.theorems[0].1 && h.theorems[1].1);
    assert!(!h.theorems[2].1);
    let w = splitting_hypothesis_report(&warped3(), &g, 1e-9).unwrap();
    assert!(w.mean_curvature.iter().skip(1).all(|&x| x > 1e-3));
    assert!(!w.theorems[0].1);
}

#[test]
fn report_serializes() {
    let m = warped3();
    let g = GridSpec::for_model(&m, 8).unwrap();
    let r = integral_formula_check(IntegralKind::MixedScalar, &m, &g, 1e-7, None).unwrap();
    let js = r.to_json();
    let v: serde_json::Value = serde_json::from_str(&js).unwrap();
    assert_eq!(v["checks"][0]["model"], m.name.as_str());
}


/// Adaptive Simpson quadrature on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

#[test]
fn sine_on_circle_vanishes() {
    let metric = MetricField::diagonal(vec!["x".into(), "y".into()], vec![Expr::one(); 2]).unwrap();
    let g = GridSpec::new(vec![64, 8], vec![0.0; 2], vec![2.0 * PI, 1.0]).unwrap();
    let v = integrate(&metric, &g, |p| Ok(p[0].sin())).unwrap();
    assert!(v.abs() < 1e-13, "{v}");
}

#[test]
fn warped_surface_volume_matches_adaptive_quadrature() {
    let m = ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 2)]).unwrap();
    let g = GridSpec::for_model(&m, 32).unwrap();
    let v = integrate(&m.metric, &g, |_| Ok(1.0)).unwrap();
    let oracle = 2.0 * PI * simpson(&|x: f64| 2.0 + x.cos(), 0.0, 2.0 * PI, 1e-13);
    assert!((v - oracle).abs() < 1e-10 * oracle, "{v} vs {oracle}");
}

#[test]
fn mean_curvature_sum_has_zero_total_divergence() {
    let m = ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 3), ex("2+cos(x0)", 3)]).unwrap();
    let g = GridSpec::for_model(&m, 16).unwrap();
    let c = divergence_theorem_check_with(&m, &g, "divergence:mean-curvature", |mp| Ok(mean_curvature_sum(mp)), 1e-8)
        .unwrap();
    assert!(c.pass, "{c:?}");
    let flat = ModelSpec::flat_torus(&[1, 2]).unwrap();
    let x = VectorFieldDef::new(vec![ex("exp(sin(x1))", 3), ex("cos(x0+x2)^3", 3), ex("sin(x0)*sin(x1)", 3)]);
    assert!(divergence_theorem_check(&flat, &GridSpec::for_model(&flat, 16).unwrap(), &x, 1e-10).unwrap().pass);
}

#[test]
fn flat_torus_integrals_vanish_identically() {
    let m = ModelSpec::flat_torus(&[1, 1, 1]).unwrap().with_contorsion(statistical_cubic(3)).unwrap();
    let g = GridSpec::for_model(&m, 8).unwrap();
    for kind in [IntegralKind::MixedScalar, IntegralKind::SigmaTwoTotal, IntegralKind::SigmaTwo { block: 1 }] {
        let r = integral_formula_check(kind, &m, &g, 1e-7, None).unwrap();
        for c in &r.checks {
            assert!(c.value.abs() < 1e-14, "{c:?}");
        }
    }
}

#[test]
fn circle_foliation_reduces_to_total_ricci() {
    // For 1-dimensional leaves σ₂ = 0 and the formula reduces to ∫ Ric(N, N) = 0.
    let m = ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 2)]).unwrap();
    let p = [0.7, 1.1];
    let mp = m.at(&p, 3).unwrap();
    assert_eq!(mp.sigma_elementary(0, 2).unwrap(), 0.0);
    let ric = mp.partial_ricci_dual(0)[0];
    // −f''/f with f = 2 + cos x.
    assert!((ric - 0.7f64.cos() / (2.0 + 0.7f64.cos())).abs() < 1e-12, "{ric}");
    let g = GridSpec::for_model(&m, 32).unwrap();
    let r = integral_formula_check(IntegralKind::SigmaTwo { block: 0 }, &m, &g, 1e-7, None).unwrap();
    assert!(r.all_pass(), "{r:?}");
}

#[test]
fn warped_three_torus_at_full_grid() {
    let m = ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 3), ex("2+cos(x0)", 3)]).unwrap();
    let g = GridSpec::for_model(&m, 32).unwrap();
    let r = integral_formula_check(IntegralKind::MixedScalar, &m, &g, 1e-7, None).unwrap();
    assert!(r.checks[0].value.abs() < 1e-7, "{r:?}");
    assert!(r.all_pass());
}

#[test]
fn perturbed_integrand_is_detected() {
    let m = warped3();
    let g = GridSpec::for_model(&m, 16).unwrap();
    let c = negative_control(IntegralKind::MixedScalar, &m, &g, 1e-7, 1e-3).unwrap();
    assert!(c.pass, "{c:?}");
    assert!((c.value - 1e-3 * 6.0 * PI * 4.0 * PI * PI).abs() < 1e-9);
}

#[test]
fn twisted_blocks_are_umbilical_and_mixed_geodesic() {
    let m = twisted3();
    let g = GridSpec::for_model(&m, 8).unwrap();
    let h = splitting_hypothesis_report(&m, &g, 1e-9).unwrap();
    assert!(h.umbilicity.iter().all(|&x| x < 1e-12), "{:?}", h.umbilicity);
    assert!(h.mixed_pairs.iter().all(|p| p.2 < 1e-12), "{:?}", h.mixed_pairs);
}

#[test]
fn mixed_sign_curvature_satisfies_no_theorem() {
    let h = splitting_hypothesis_report(&warped3(), &GridSpec::for_model(&warped3(), 8).unwrap(), 1e-9).unwrap();
    assert!(h.s_bar_min < 0.0 && h.s_bar_max > 0.0);
    assert!(h.satisfied().is_empty());
    let flat = ModelSpec::flat_torus(&[1, 2]).unwrap();
    let f = splitting_hypothesis_report(&flat, &GridSpec::for_model(&flat, 8).unwrap(), 1e-9).unwrap();
    assert_eq!(f.theorems[0].2, "splits (trivially verified: product metric)");
}

//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_FAILURES` are evaluated and reported like the others,
//! but a failure there does not fail the run; if one starts passing the run fails
//! so the list gets updated.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mixscal::connections::{Contorsion, ContorsionAt, ContorsionKind};
use mixscal::expr::{parse_expression, Expr};
use mixscal::geometry::VectorFieldDef;
use mixscal::harness::{integral_formula_checks, GridSpec, IntegralKind};
use mixscal::identities::{identity_residuals, IdentitySuite};
use mixscal::models::ModelSpec;
use mixscal::multiproduct::values;
use mixscal::variational::{
    aggregate_variation, analytic_variation_barq, analytic_variation_q, det_exact, el_report,
    el_residual, mu_matrix, mu_solve, mu_solve_dense, oracle_aggregate, oracle_variation_barq,
    oracle_variation_q, oracle_volume_variation, semi_symmetric_mixed_ricci,
    semi_symmetric_mixed_ricci_explicit, volume_variation_utils, ElForm, NamedValue,
    VariationFamily,
};

/// `det A = 2^{k−1}(2 − n)` only holds for even `k`.
const KNOWN_FAILURES: &[u32] = &[7];

fn ex(s: &str, n: usize) -> Expr {
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let c: Vec<&str> = names.iter().map(String::as_str).collect();
    parse_expression(s, &c).unwrap()
}

/// Symmetric cubic form; with `adapted` only components inside a single block survive.
fn cubic(m: &ModelSpec, adapted: bool) -> Contorsion {
    let n = m.dim();
    let ranges = m.splitting.ranges();
    let block = |a: usize| ranges.iter().position(|r| r.contains(&a)).unwrap();
    let mut c = vec![Expr::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if adapted && !(block(i) == block(j) && block(j) == block(k)) {
                    continue;
                }
                let mut s = [i, j, k];
                s.sort();
                let e = format!("0.{}*sin(x{}+{})+0.1", (s[0] * 7 + s[1] * 3 + s[2]) % 5 + 1, (s[0] + s[2]) % n, s[1] + 1);
                c[(i * n + j) * n + k] = ex(&e, n);
            }
        }
    }
    Contorsion::statistical(n, c).unwrap()
}

fn semi(n: usize) -> Contorsion {
    Contorsion::semi_symmetric(VectorFieldDef::new(
        (0..n).map(|c| ex(&format!("0.3*cos(x{})+0.{}", (c + 1) % n, c + 1), n)).collect(),
    ))
}

fn flat3() -> ModelSpec {
    ModelSpec::flat_torus(&[1, 2]).unwrap()
}

fn warped3() -> ModelSpec {
    ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 3), ex("1.5+0.5*sin(2*x0)", 3)]).unwrap()
}

fn twisted3() -> ModelSpec {
    ModelSpec::multiply_twisted_torus(1, vec![ex("2+0.5*cos(x0)*cos(x1)", 3), ex("1.5+0.3*sin(x0+x2)", 3)]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(worst: f64, tol: f64, what: &str) -> Verdict {
    Verdict { pass: worst < tol, detail: format!("{what}: max {worst:.2e} (tol {tol:.0e})") }
}

fn contorted_models() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for m in [flat3(), warped3(), twisted3()] {
        out.push(m.clone().with_contorsion(cubic(&m, true)).unwrap());
        out.push(m.clone().with_contorsion(semi(3)).unwrap());
        out.push(m);
    }
    out
}

fn criterion_1() -> Verdict {
    let mut worst = 0.0_f64;
    let mut names = std::collections::BTreeSet::new();
    for m in contorted_models() {
        let pts = m.sample_points(100, 1);
        if matches!(m.contorsion.kind(), ContorsionKind::Statistical { .. }) {
            let mp = m.at(&pts[0], 2).unwrap();
            assert!(ContorsionAt::for_contorsion(&mp, &m.contorsion).unwrap().adapted_defect() < 1e-12);
        }
        for r in identity_residuals(&m, &pts, IdentitySuite::Structural).unwrap() {
            worst = worst.max(r.residual);
            names.insert(r.name);
        }
    }
    verdict(worst, 1e-7, &format!("{} identities, 9 model/connection pairs, 100 points", names.len()))
}

fn criterion_2() -> Verdict {
    let mut worst = 0.0_f64;
    for m in contorted_models().into_iter().step_by(3) {
        for r in identity_residuals(&m, &m.sample_points(100, 1), IdentitySuite::Traces).unwrap() {
            worst = worst.max(r.residual);
        }
    }
    verdict(worst, 1e-9, "6 trace identities, 3 models, 100 points")
}

fn criterion_3() -> Verdict {
    let mut worst = 0.0_f64;
    for (r, want) in [(1.0, 1.0), (2.0, 0.25)] {
        let m = ModelSpec::sphere_chart(r).unwrap();
        for p in m.sample_points(20, 3) {
            worst = worst.max((m.at(&p, 2).unwrap().mixed_scalar().total - want).abs());
        }
    }
    verdict(worst, 1e-8, "sphere mixed scalar curvature, radii 1 and 2")
}

fn criterion_4() -> Verdict {
    let m = warped3();
    let mut h_err = 0.0_f64;
    let mut geodesic = 0.0_f64;
    for p in m.sample_points(50, 4) {
        let mp = m.at(&p, 2).unwrap();
        let ex = mp.extrinsic();
        for i in 1..m.splitting.k() {
            let h = values(&mp.to_chart(&ex.blocks[i].mean));
            let want = m.known_mean_curvature(i, &p).unwrap().unwrap();
            for (a, b) in h.iter().zip(&want) {
                h_err = h_err.max((a - b).abs());
            }
        }
        geodesic = geodesic.max(values(&ex.blocks[0].h).iter().fold(0.0, |x, y| x.max(y.abs())));
    }
    Verdict {
        pass: h_err < 1e-8 && geodesic < 1e-10,
        detail: format!("mean curvature {h_err:.2e} (tol 1e-8), fiber second fundamental form {geodesic:.2e} (tol 1e-10)"),
    }
}

fn criterion_5() -> Verdict {
    let mut worst = 0.0_f64;
    let mut converged = true;
    for m in [warped3(), twisted3()] {
        let m = m.clone().with_contorsion(cubic(&m, false)).unwrap();
        let grid = GridSpec::for_model(&m, 32).unwrap();
        let kinds = [IntegralKind::MixedScalar, IntegralKind::MetricAffine];
        let r = integral_formula_checks(&kinds, &m, &grid, 1e-7, Some(1e-12)).unwrap();
        for c in r.checks.iter().filter(|c| c.id.ends_with(":integrand")) {
            worst = worst.max(c.value.abs());
        }
        for (c, conv) in r.checks.iter().filter(|c| c.id.ends_with(":integrand")).zip(&r.convergence) {
            let floor = 1e-12 * (c.tolerance / 1e-7);
            let at_floor = c.value.abs() <= floor;
            let shrinks = conv.pairs.len() == 3 && conv.pairs[2].1.abs() * 10.0 <= conv.pairs[1].1.abs();
            converged &= at_floor || shrinks;
        }
    }
    Verdict {
        pass: worst < 1e-7 && converged,
        detail: format!("max |integral| {worst:.2e} at 32^3 (tol 1e-7), refinement {}", if converged { "at round-off floor" } else { "not converging" }),
    }
}

fn criterion_6() -> Verdict {
    let mut worst = 0.0_f64;
    let mut counts = (0, 0);
    let note = |a: &[NamedValue], o: &[NamedValue], w: &mut f64| {
        for (x, y) in a.iter().zip(o) {
            *w = w.max(rel(x.value, y.value));
        }
    };
    let base = ModelSpec::multiply_twisted_torus(2, vec![ex("2+0.5*cos(x0)*cos(x2)+0.3*sin(x1)", 3)]).unwrap();
    let m = base.clone().with_contorsion(cubic(&base, false)).unwrap();
    let k = m.splitting.k();
    for (s, p) in m.sample_points(20, 6).into_iter().enumerate() {
        for f in 0..3 {
            let j = (s + f) % k;
            let fam = VariationFamily::sample(&m.splitting, j, (1000 + 3 * s + f) as u64).unwrap();
            let a = analytic_variation_q(&m, &fam, &p).unwrap();
            counts.0 = a.len();
            note(&a, &oracle_variation_q(&m, &fam, &p).unwrap(), &mut worst);
            let a = analytic_variation_barq(&m, &fam, &p).unwrap();
            counts.1 = a.len();
            note(&a, &oracle_variation_barq(&m, &fam, &p).unwrap(), &mut worst);
            let agg = aggregate_variation(&m, &fam, &p).unwrap();
            let (dq, dbq) = oracle_aggregate(&m, &fam, &p).unwrap();
            worst = worst.max(rel(agg.dq, dq)).max(rel(agg.dbarq, dbq));
            let x: Vec<_> = (0..3).map(|c| ex(&format!("sin(x{})+0.{}", (c + 2) % 3, c + 3), 3).eval_jet(&p, 2).unwrap()).collect();
            let va = volume_variation_utils(&m, &fam, &p, &x).unwrap();
            let vo = oracle_volume_variation(&m, &fam, &p, &x).unwrap();
            worst = worst.max(rel(va.dvol_factor, vo.dvol_factor)).max(rel(va.div_correction, vo.div_correction));
        }
    }
    verdict(worst, 1e-5, &format!("{} + {} derivatives and aggregates, 20 points x 3 families", counts.0, counts.1))
}

fn criterion_7() -> Verdict {
    fn rec(prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        if prefix.len() == 6 {
            return;
        }
        for d in 1..=5 {
            prefix.push(d);
            rec(prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    rec(&mut Vec::new(), &mut all);
    all.retain(|v| v.iter().sum::<usize>() > 2);
    let mut worst = 0.0_f64;
    let mut det_bad = 0;
    let mut first_bad = None;
    for nv in &all {
        let a: Vec<f64> = (0..nv.len()).map(|i| ((i * 7 + 3) % 5) as f64 - 1.7).collect();
        let x = mu_solve(nv, &a).unwrap();
        let y = mu_solve_dense(nv, &a).unwrap();
        for (p, q) in x.iter().zip(&y) {
            worst = worst.max((p - q).abs());
        }
        let n: i64 = nv.iter().sum::<usize>() as i64;
        let det = det_exact(&mu_matrix(nv));
        if det != 2i64.pow(nv.len() as u32 - 1) * (2 - n) {
            det_bad += 1;
            first_bad.get_or_insert((nv.clone(), det));
        }
    }
    let mut detail = format!("{} splittings, closed form vs dense {worst:.2e} (tol 1e-12)", all.len());
    if let Some((nv, det)) = first_bad {
        detail += &format!("; det formula fails for {det_bad} splittings with odd k, e.g. {nv:?}: det = {det}");
    }
    Verdict { pass: worst < 1e-12 && det_bad == 0, detail }
}

fn criterion_8() -> Verdict {
    let flat = ModelSpec::flat_torus(&[1, 1, 1]).unwrap();
    let r = el_report(&flat, &flat.sample_points(20, 8), ElForm::Compact).unwrap();
    let flat_res = r.blocks.iter().fold(0.0_f64, |a, b| a.max(b.max_residual));
    let flat_dev = r.blocks.iter().fold(0.0_f64, |a, b| a.max(b.lambda_deviation));
    let mut forms = 0.0_f64;
    for m in [warped3(), twisted3(), ModelSpec::helical(false).unwrap(), ModelSpec::helical(true).unwrap()] {
        for p in m.sample_points(10, 8) {
            for j in 0..m.splitting.k() {
                let c = el_residual(&m, &p, j, ElForm::Compact, Some(0.3)).unwrap();
                let e = el_residual(&m, &p, j, ElForm::Expanded, Some(0.3)).unwrap();
                forms = c.residual.iter().zip(&e.residual).fold(forms, |a, (x, y)| a.max((x - y).abs()));
            }
        }
    }
    let mut semi_err = 0.0_f64;
    for m in [warped3(), twisted3(), ModelSpec::helical(true).unwrap()] {
        let m = m.clone().with_contorsion(semi(m.dim())).unwrap();
        for p in m.sample_points(10, 9) {
            let a = semi_symmetric_mixed_ricci(&m, &p).unwrap();
            let b = semi_symmetric_mixed_ricci_explicit(&m, &p).unwrap();
            semi_err = a.ricci.iter().zip(&b.ricci).fold(semi_err, |s, (x, y)| s.max((x - y).abs()));
        }
    }
    Verdict {
        pass: flat_res == 0.0 && flat_dev < 1e-10 && forms < 1e-8 && semi_err < 1e-7,
        detail: format!(
            "flat residual {flat_res:.1e}, multiplier spread {flat_dev:.1e} (tol 1e-10); compact vs expanded {forms:.2e} (tol 1e-8); semi-symmetric Ricci {semi_err:.2e} (tol 1e-7)"
        ),
    }
}

fn criterion_9() -> Verdict {
    let mut worst = 0.0_f64;
    for m in [flat3(), warped3(), twisted3()] {
        let m = m.clone().with_contorsion(semi(3)).unwrap();
        for r in identity_residuals(&m, &m.sample_points(100, 10), IdentitySuite::Structural).unwrap() {
            if r.name.contains("semi-symmetric reduction") {
                worst = worst.max(r.residual);
            }
        }
    }
    verdict(worst, 1e-9, "contorted Q against the semi-symmetric closed form, 3 models, 100 points")
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/twisted_statistical.toml");
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_mixscal"))
            .arg("--config")
            .arg(&cfg)
            .args(["--grid", "8", "--seed", "17", "--out"])
            .arg(out)
            .output()
            .unwrap()
            .status
            .code()
    };
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let codes = (run(&a), run(&b));
    let same = fs::read(&a).ok().zip(fs::read(&b).ok()).map_or(false, |(x, y)| x == y && !x.is_empty());
    Verdict {
        pass: same && codes.0 == codes.1,
        detail: format!("two runs, exit codes {:?}/{:?}, reports {}", codes.0, codes.1, if same { "byte-identical" } else { "differ" }),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "pointwise identity suite", criterion_1),
        (2, "trace identities", criterion_2),
        (3, "sign convention on spheres", criterion_3),
        (4, "multiply warped fixture", criterion_4),
        (5, "integral formulas", criterion_5),
        (6, "variation formulas against finite differences", criterion_6),
        (7, "mu-system", criterion_7),
        (8, "Euler-Lagrange consistency", criterion_8),
        (9, "semi-symmetric reduction", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        let t = Instant::now();
        let v = f();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (v.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known, documented)",
            (false, false) => "FAIL",
            (true, true) => "PASS (listed as known failure)",
        };
        if v.pass == known {
            unexpected += 1;
        }
        println!("criterion {id:>2} {tag}: {name}: {} [{:.1}s]", v.detail, t.elapsed().as_secs_f64());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}

use mixscal::connections::Contorsion;
use mixscal::expr::{parse_expression, Expr};
use mixscal::geometry::VectorFieldDef;
use mixscal::identities::{identity_residuals, IdentitySuite};
use mixscal::models::ModelSpec;

fn ex(s: &str, n: usize) -> Expr {
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let c: Vec<&str> = names.iter().map(String::as_str).collect();
    parse_expression(s, &c).unwrap()
}

fn cubic(n: usize) -> Contorsion {
    let mut c = vec![Expr::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = [i, j, k];
                s.sort();
                c[(i * n + j) * n + k] = ex(&format!("0.2*sin(x{}+{})+0.1", (s[0] + s[2]) % n, s[1] + 1), n);
            }
        }
    }
    Contorsion::statistical(n, c).unwrap()
}

fn models() -> Vec<ModelSpec> {
    let base = vec![
        ModelSpec::flat_torus(&[1, 1, 1]).unwrap(),
        ModelSpec::multiply_warped_torus(1, vec![ex("2+cos(x0)", 3), ex("1.5+0.5*sin(2*x0)", 3)]).unwrap(),
        ModelSpec::multiply_twisted_torus(1, vec![ex("2+0.5*cos(x0)*cos(x1)", 3), ex("1.5+0.3*sin(x0+x2)", 3)]).unwrap(),
        ModelSpec::helical(true).unwrap(),
    ];
    let mut out = Vec::new();
    for m in base {
        let n = m.dim();
        let u = VectorFieldDef::new((0..n).map(|i| ex(&format!("0.{}+0.2*sin(x{})", i + 2, (i + 1) % n), n)).collect());
        out.push(m.clone().with_contorsion(cubic(n)).unwrap());
        out.push(m.clone().with_contorsion(Contorsion::semi_symmetric(u)).unwrap());
        out.push(m);
    }
    out
}

#[test]
fn structural_identities_hold() {
    for m in models() {
        let pts = m.sample_points(10, 3);
        for r in identity_residuals(&m, &pts, IdentitySuite::Structural).unwrap() {
            assert!(r.residual < 1e-9, "{} {}: {:e}", m.name, r.name, r.residual);
        }
    }
}

#[test]
fn trace_identities_hold() {
    for m in models() {
        let pts = m.sample_points(10, 4);
        let rs = identity_residuals(&m, &pts, IdentitySuite::Traces).unwrap();
        assert_eq!(rs.len(), 6);
        for r in rs {
            assert!(r.residual < 1e-10, "{} {}: {:e}", m.name, r.name, r.residual);
        }
    }
}

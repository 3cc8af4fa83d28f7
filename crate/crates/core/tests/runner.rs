use mixscal::connections::ContorsionKind;
use mixscal::runner::{build_model, run, CheckKind, RunConfig, RunError};

fn cfg(text: &str) -> Result<RunConfig, RunError> {
    RunConfig::from_toml(text)
}

const FLAT: &str = r#"
checks = ["identity", "euler-lagrange"]
points = 5
[model]
name = "flat_torus"
partition = [1, 2]
"#;

#[test]
fn defaults_and_suite_expansion() {
    let c = cfg("[model]\nname = \"helical\"\n").unwrap();
    assert_eq!(c.grid, 16);
    assert_eq!(c.seed, 0);
    assert_eq!(c.suites(), CheckKind::SUITES.to_vec());
    let c = cfg(FLAT).unwrap();
    assert_eq!(c.suites(), vec![CheckKind::Identity, CheckKind::EulerLagrange]);
    assert_eq!("euler-lagrange".parse::<CheckKind>().unwrap(), CheckKind::EulerLagrange);
    assert!("everything".parse::<CheckKind>().is_err());
}

#[test]
fn invalid_configs_are_config_errors() {
    let bad = [
        "[model]\nname = \"flat_torus\"\npartition = [1, 1]\n[tolerances]\nintegral = -1e-7\n",
        "[model]\nname = \"klein_bottle\"\n",
        "grid = 4\n[model]\nname = \"flat_torus\"\npartition = [1, 1]\n",
        "[model]\nname = \"flat_torus\"\npartition = [1, 1]\ncolour = 3\n",
        "[model\nname = 1",
    ];
    for text in bad {
        assert!(matches!(cfg(text), Err(RunError::Config(_))), "{text}");
    }
    let e = cfg("[model\nname = 1").unwrap_err().to_string();
    assert!(e.contains("line 1"), "{e}");
}

#[test]
fn builds_models_and_contorsions() {
    let c = cfg(r#"
[model]
name = "multiply_twisted_torus"
base_dim = 1
u = ["2+cos(x0)*cos(x1)", "2+sin(x0)"]
[contorsion]
kind = "semi-symmetric"
u = ["0.1", "0.2*sin(x0)", "0"]
"#)
    .unwrap();
    let m = build_model(&c.model, c.contorsion.as_ref()).unwrap();
    assert_eq!(m.dim(), 3);
    assert!(matches!(m.contorsion.kind(), ContorsionKind::SemiSymmetric { .. }));

    let c = cfg(r#"
[model]
name = "custom"
coords = ["x", "y"]
metric = [["1", "0"], ["0", "(a+cos(x))^2"]]
params = { a = 2.0 }
partition = [1, 1]
periods = [[0.0, 6.283185307179586], [0.0, 6.283185307179586]]
"#)
    .unwrap();
    let m = build_model(&c.model, None).unwrap();
    assert!(m.closed);
    let p = [0.4, 1.0];
    let s = m.at(&p, 3).unwrap().mixed_scalar().total;
    // −u''/u for u = 2 + cos x.
    assert!((s - 0.4f64.cos() / (2.0 + 0.4f64.cos())).abs() < 1e-12);

    let c = cfg("[model]\nname = \"multiply_warped_torus\"\nbase_dim = 1\nu = [\"cos(x0)\"]\n").unwrap();
    assert!(matches!(build_model(&c.model, None), Err(RunError::Config(_))));
}

#[test]
fn flat_run_passes_with_zero_residuals() {
    let r = run(&cfg(FLAT).unwrap()).unwrap();
    assert!(r.all_pass());
    assert!(r.checks.iter().all(|c| c.value.abs() < 1e-12));
    assert!(r.checks.iter().any(|c| c.id == "euler-lagrange:flat-multiplier"));
}

#[test]
fn integral_suite_rejects_open_models() {
    let c = cfg("checks = [\"integral\"]\n[model]\nname = \"sphere_chart\"\nradius = 1.0\n").unwrap();
    assert!(matches!(run(&c), Err(RunError::Config(_))));
    let c = cfg("checks = [\"all\"]\npoints = 3\nvariation_points = 1\nfamilies = 1\n[model]\nname = \"sphere_chart\"\nradius = 1.0\n").unwrap();
    let r = run(&c).unwrap();
    assert!(r.all_pass(), "{}", r.to_json());
    assert!(r.checks.iter().all(|c| !c.id.starts_with("integral")));
}

#[test]
fn singular_metric_is_numerical_breakdown() {
    let c = cfg(r#"
checks = ["identity"]
[model]
name = "custom"
coords = ["x", "y"]
metric = [["1", "1"], ["1", "1"]]
partition = [1, 1]
periods = [[0.0, 1.0], [0.0, 1.0]]
"#)
    .unwrap();
    assert!(matches!(run(&c), Err(RunError::Numerical(_))));
}

#[test]
fn tight_tolerance_reports_failures() {
    let mut c = cfg(r#"
checks = ["identity"]
points = 3
[model]
name = "helical"
"#)
    .unwrap();
    c.tolerances.identity = 1e-300;
    let r = run(&c).unwrap();
    assert!(!r.all_pass());
}

#[test]
fn same_seed_same_report() {
    let text = r#"
seed = 9
checks = ["identity", "variation"]
points = 4
variation_points = 1
families = 1
grid = 8
[model]
name = "multiply_warped_torus"
base_dim = 1
u = ["2+cos(x0)", "1.5+0.5*sin(2*x0)"]
"#;
    let a = run(&cfg(text).unwrap()).unwrap().to_json();
    let b = run(&cfg(text).unwrap()).unwrap().to_json();
    assert_eq!(a, b);
    let c = run(&cfg(&text.replace("seed = 9", "seed = 10")).unwrap()).unwrap().to_json();
    assert_ne!(a, c);
}

//! Declarative run configuration and the verification suites it selects.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::connections::{Contorsion, ContorsionAt, ContorsionKind};
use crate::error::GeometryError;
use crate::expr::{parse_with_params, Expr};
use crate::geometry::{MetricField, VectorFieldDef};
use crate::harness::{
    divergence_theorem_check_with, integral_formula_checks, mean_curvature_sum, CheckEntry, GridSpec,
    IntegralKind, VerificationReport,
};
use crate::identities::{identity_residuals, IdentitySuite};
use crate::models::{Family, ModelSpec};
use crate::multiproduct::{values, SplittingSpec};
use crate::variational::{
    aggregate_variation, analytic_semi_symmetric_variation, analytic_variation_barq, analytic_variation_q,
    barq_tensor, el_report, el_residual_at, oracle_aggregate, oracle_semi_symmetric_variation, oracle_u_derivative,
    oracle_variation_barq, oracle_variation_q, semi_symmetric_el, semi_symmetric_mixed_ricci,
    semi_symmetric_mixed_ricci_explicit, ElForm, NamedValue, VariationFamily,
};

/// Verification suites selectable from a config or the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Identity,
    Integral,
    Variation,
    EulerLagrange,
    SemiSymmetric,
    All,
}

impl CheckKind {
    pub const SUITES: [CheckKind; 5] = [
        CheckKind::Identity,
        CheckKind::Integral,
        CheckKind::Variation,
        CheckKind::EulerLagrange,
        CheckKind::SemiSymmetric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Identity => "identity",
            CheckKind::Integral => "integral",
            CheckKind::Variation => "variation",
            CheckKind::EulerLagrange => "euler-lagrange",
            CheckKind::SemiSymmetric => "semi-symmetric",
            CheckKind::All => "all",
        }
    }
}

impl FromStr for CheckKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckKind::SUITES
            .iter()
            .chain([CheckKind::All].iter())
            .find(|c| c.name() == s.trim())
            .copied()
            .ok_or_else(|| format!("unknown check '{s}' (expected identity, integral, variation, euler-lagrange, semi-symmetric or all)"))
    }
}

/// A built-in model with its parameters, or an inline metric.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    FlatTorus {
        partition: Vec<usize>,
    },
    MultiplyWarpedTorus {
        base_dim: usize,
        u: Vec<String>,
    },
    MultiplyTwistedTorus {
        base_dim: usize,
        u: Vec<String>,
    },
    SphereChart {
        radius: f64,
    },
    Helical {
        #[serde(default)]
        lorentzian: bool,
    },
    Custom {
        coords: Vec<String>,
        metric: Vec<Vec<String>>,
        /// Coordinate block sizes, or explicit spanning fields per block.
        #[serde(default)]
        partition: Option<Vec<usize>>,
        #[serde(default)]
        blocks: Option<Vec<Vec<Vec<String>>>>,
        #[serde(default)]
        signature: Option<Vec<i8>>,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        /// Period box; the model is treated as a closed torus when present.
        #[serde(default)]
        periods: Option<Vec<[f64; 2]>>,
        /// Chart box for sampling when not closed.
        #[serde(default)]
        domain: Option<Vec<[f64; 2]>>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContorsionConfig {
    Zero,
    /// Lower-index cubic form, `n³` entries in row-major order.
    Statistical { cubic: Vec<String> },
    SemiSymmetric { u: Vec<String> },
    General { components: Vec<String> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub trace: f64,
    pub integral: f64,
    pub variation: f64,
    pub euler_lagrange: f64,
    pub semi_symmetric: f64,
    pub reduction: f64,
    /// Round-off floor below which the grid is not refined.
    pub quadrature_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-7,
            trace: 1e-9,
            integral: 1e-7,
            variation: 1e-5,
            euler_lagrange: 1e-8,
            semi_symmetric: 1e-7,
            reduction: 1e-9,
            quadrature_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub contorsion: Option<ContorsionConfig>,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    /// Nodes per axis for quadrature.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Sample points for pointwise suites.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Sample points and random families for the finite-difference suites.
    #[serde(default = "default_variation_points")]
    pub variation_points: usize,
    #[serde(default = "default_families")]
    pub families: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_checks() -> Vec<CheckKind> {
    vec![CheckKind::All]
}
fn default_grid() -> usize {
    16
}
fn default_points() -> usize {
    20
}
fn default_variation_points() -> usize {
    4
}
fn default_families() -> usize {
    2
}

/// Why a run could not produce a verdict.
#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical breakdown: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<GeometryError> for RunError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::SingularMetric { .. }
            | GeometryError::NonFinite(_)
            | GeometryError::DegenerateBlock { .. }
            | GeometryError::Signature { .. } => RunError::Numerical(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

type RunResult<T> = Result<T, RunError>;

impl RunConfig {
    pub fn from_toml(text: &str) -> RunResult<RunConfig> {
        let c: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> RunResult<()> {
        let t = &self.tolerances;
        let named = [
            ("identity", t.identity),
            ("trace", t.trace),
            ("integral", t.integral),
            ("variation", t.variation),
            ("euler_lagrange", t.euler_lagrange),
            ("semi_symmetric", t.semi_symmetric),
            ("reduction", t.reduction),
            ("quadrature_floor", t.quadrature_floor),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(RunError::Config(format!("tolerance '{name}' must be positive, got {v}")));
        }
        if self.grid < crate::harness::MIN_NODES {
            return Err(RunError::Config(format!("grid must be at least {}", crate::harness::MIN_NODES)));
        }
        if self.points == 0 || self.variation_points == 0 || self.families == 0 {
            return Err(RunError::Config("point and family counts must be positive".into()));
        }
        if self.checks.is_empty() {
            return Err(RunError::Config("no checks selected".into()));
        }
        Ok(())
    }

    /// Selected suites with `all` expanded, in canonical order.
    pub fn suites(&self) -> Vec<CheckKind> {
        if self.checks.contains(&CheckKind::All) {
            return CheckKind::SUITES.to_vec();
        }
        let mut v = self.checks.clone();
        v.sort();
        v.dedup();
        v
    }

    fn explicit(&self, c: CheckKind) -> bool {
        self.checks.contains(&c)
    }
}

fn parse_all(items: &[String], coords: &[&str], params: &BTreeMap<String, f64>) -> RunResult<Vec<Expr>> {
    items
        .iter()
        .map(|s| parse_with_params(s, coords, params).map_err(|e| RunError::Config(format!("expression '{s}': {e}"))))
        .collect()
}

fn torus_coords(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Builds the model (with its contorsion) described by a config.
pub fn build_model(model: &ModelConfig, contorsion: Option<&ContorsionConfig>) -> RunResult<ModelSpec> {
    let none = BTreeMap::new();
    let m = match model {
        ModelConfig::FlatTorus { partition } => ModelSpec::flat_torus(partition)?,
        ModelConfig::MultiplyWarpedTorus { base_dim, u } | ModelConfig::MultiplyTwistedTorus { base_dim, u } => {
            let names = torus_coords(base_dim + u.len());
            let c: Vec<&str> = names.iter().map(String::as_str).collect();
            let u = parse_all(u, &c, &none)?;
            if matches!(model, ModelConfig::MultiplyWarpedTorus { .. }) {
                ModelSpec::multiply_warped_torus(*base_dim, u)?
            } else {
                ModelSpec::multiply_twisted_torus(*base_dim, u)?
            }
        }
        ModelConfig::SphereChart { radius } => ModelSpec::sphere_chart(*radius)?,
        ModelConfig::Helical { lorentzian } => ModelSpec::helical(*lorentzian)?,
        ModelConfig::Custom { coords, metric, partition, blocks, signature, params, periods, domain } => {
            let c: Vec<&str> = coords.iter().map(String::as_str).collect();
            let n = c.len();
            let mut g = MetricField::parse(&c, metric, params)?;
            if let Some(s) = signature {
                g = g.with_signature(s.clone())?;
            }
            let splitting = match (partition, blocks) {
                (Some(p), None) => SplittingSpec::coordinate(p)?,
                (None, Some(b)) => {
                    let mut out = Vec::new();
                    for block in b {
                        let mut fields = Vec::new();
                        for v in block {
                            fields.push(VectorFieldDef::new(parse_all(v, &c, params)?));
                        }
                        out.push(fields);
                    }
                    SplittingSpec::new(n, out)?
                }
                _ => return Err(RunError::Config("custom model needs exactly one of 'partition' or 'blocks'".into())),
            };
            let boxes = |b: &Vec<[f64; 2]>| -> RunResult<Vec<(f64, f64)>> {
                if b.len() != n || b.iter().any(|r| !(r[1] > r[0])) {
                    return Err(RunError::Config("coordinate box must give one increasing range per coordinate".into()));
                }
                Ok(b.iter().map(|r| (r[0], r[1])).collect())
            };
            let (closed, dom) = match (periods, domain) {
                (Some(p), None) => (true, boxes(p)?),
                (None, Some(d)) => (false, boxes(d)?),
                _ => return Err(RunError::Config("custom model needs exactly one of 'periods' or 'domain'".into())),
            };
            ModelSpec {
                name: "custom".into(),
                metric: g,
                splitting,
                contorsion: Contorsion::zero(n),
                family: Family::Custom,
                closed,
                domain: dom,
            }
        }
    };
    let Some(cc) = contorsion else { return Ok(m) };
    let n = m.dim();
    let names: Vec<String> = m.metric.coords().to_vec();
    let c: Vec<&str> = names.iter().map(String::as_str).collect();
    let params = match model {
        ModelConfig::Custom { params, .. } => params.clone(),
        _ => none,
    };
    let con = match cc {
        ContorsionConfig::Zero => Contorsion::zero(n),
        ContorsionConfig::Statistical { cubic } => Contorsion::statistical(n, parse_all(cubic, &c, &params)?)?,
        ContorsionConfig::SemiSymmetric { u } => {
            if u.len() != n {
                return Err(RunError::Config(format!("semi-symmetric field needs {n} components")));
            }
            Contorsion::semi_symmetric(VectorFieldDef::new(parse_all(u, &c, &params)?))
        }
        ContorsionConfig::General { components } => Contorsion::general(n, parse_all(components, &c, &params)?)?,
    };
    Ok(m.with_contorsion(con)?)
}

/// Built-in model names with their parameters.
pub fn model_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("flat_torus", "partition = [n_1, ..., n_k]"),
        ("multiply_warped_torus", "base_dim = m, u = [expressions in x0..x(m-1)]"),
        ("multiply_twisted_torus", "base_dim = m, u = [u_i in base coords and its own fiber coordinate]"),
        ("sphere_chart", "radius = r (pointwise only, not closed)"),
        ("helical", "lorentzian = true|false (non-integrable splitting of a 4-torus)"),
        ("custom", "coords, metric, partition | blocks, periods | domain, signature?, params?"),
    ]
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

fn pointwise(id: String, equation: &str, value: f64, tolerance: f64, model: &ModelSpec, points: usize) -> CheckEntry {
    CheckEntry {
        id,
        equation: equation.to_string(),
        value,
        tolerance,
        pass: value.abs() <= tolerance,
        grid: Vec::new(),
        model: model.name.clone(),
        points,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Running maxima of named relative errors, in first-seen order.
#[derive(Default)]
struct MaxTable(Vec<(String, f64)>);

impl MaxTable {
    fn push(&mut self, name: &str, v: f64) {
        match self.0.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(v),
            None => self.0.push((name.to_string(), v)),
        }
    }

    fn merge(&mut self, other: MaxTable) {
        for (n, v) in other.0 {
            self.push(&n, v);
        }
    }

    fn compare(&mut self, prefix: &str, a: &[NamedValue], o: &[NamedValue]) {
        for (x, y) in a.iter().zip(o) {
            self.push(&format!("{prefix}{}", x.name), rel(x.value, y.value));
        }
    }
}

fn identity_suite(cfg: &RunConfig, m: &ModelSpec, pts: &[Vec<f64>]) -> RunResult<Vec<CheckEntry>> {
    let mut out = Vec::new();
    for (suite, tol) in [(IdentitySuite::Structural, cfg.tolerances.identity), (IdentitySuite::Traces, cfg.tolerances.trace)] {
        for r in identity_residuals(m, pts, suite)? {
            let t = if r.name.contains("reduction") { cfg.tolerances.reduction } else { tol };
            out.push(pointwise(format!("identity:{}", slug(&r.name)), &r.name, r.residual, t, m, r.points));
        }
    }
    Ok(out)
}

fn is_riemannian(m: &ModelSpec) -> RunResult<bool> {
    let p = &m.sample_points(1, 0)[0];
    Ok(m.at(p, 1)?.frame.eps.iter().all(|&e| e > 0.0))
}

fn integral_suite(cfg: &RunConfig, m: &ModelSpec) -> RunResult<VerificationReport> {
    let grid = GridSpec::for_model(m, cfg.grid)?;
    let tol = cfg.tolerances.integral;
    let mut report = VerificationReport::default();
    report.checks.push(divergence_theorem_check_with(
        m,
        &grid,
        "divergence:mean-curvature-sum",
        |mp| Ok(mean_curvature_sum(mp)),
        tol,
    )?);
    let mut kinds = vec![IntegralKind::MixedScalar];
    match m.contorsion.kind() {
        ContorsionKind::Zero => {}
        ContorsionKind::Statistical { .. } => kinds.extend([IntegralKind::MetricAffine, IntegralKind::Statistical]),
        _ => kinds.push(IntegralKind::MetricAffine),
    }
    let dims = m.splitting.block_dims();
    if is_riemannian(m)? {
        if dims.iter().all(|&d| d == 1) {
            kinds.push(IntegralKind::SigmaTwoTotal);
        }
        kinds.extend((0..dims.len()).filter(|&i| dims[i] == 1).map(|block| IntegralKind::SigmaTwo { block }));
    }
    report.extend(integral_formula_checks(&kinds, m, &grid, tol, Some(cfg.tolerances.quadrature_floor))?);
    Ok(report)
}

fn variation_suite(cfg: &RunConfig, m: &ModelSpec) -> RunResult<Vec<CheckEntry>> {
    let pts = m.sample_points(cfg.variation_points, cfg.seed.wrapping_add(1));
    let k = m.splitting.k();
    let statistical = matches!(m.contorsion.kind(), ContorsionKind::Statistical { .. });
    let jobs: Vec<(usize, usize, usize)> = (0..pts.len())
        .flat_map(|s| (0..k).flat_map(move |j| (0..cfg.families).map(move |f| (s, j, f))))
        .collect();
    let tables = jobs
        .par_iter()
        .map(|&(s, j, f)| -> RunResult<MaxTable> {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((s * 131 + j * 17 + f) as u64);
            let fam = VariationFamily::sample(&m.splitting, j, seed)?;
            let p = &pts[s];
            let mut t = MaxTable::default();
            t.compare("", &analytic_variation_q(m, &fam, p)?, &oracle_variation_q(m, &fam, p)?);
            let a = aggregate_variation(m, &fam, p)?;
            let (dq, dbq) = oracle_aggregate(m, &fam, p)?;
            t.push("aggregate Q", rel(a.dq, dq));
            if statistical {
                t.compare("contorted ", &analytic_variation_barq(m, &fam, p)?, &oracle_variation_barq(m, &fam, p)?);
                t.push("aggregate contorted Q", rel(a.dbarq, dbq));
            }
            Ok(t)
        })
        .collect::<RunResult<Vec<_>>>()?;
    let mut all = MaxTable::default();
    for t in tables {
        all.merge(t);
    }
    let n = jobs.len();
    Ok(all
        .0
        .into_iter()
        .map(|(name, v)| pointwise(format!("variation:{}", slug(&name)), &format!("first variation of {name}"), v, cfg.tolerances.variation, m, n))
        .collect())
}

fn euler_lagrange_suite(cfg: &RunConfig, m: &ModelSpec, pts: &[Vec<f64>]) -> RunResult<Vec<CheckEntry>> {
    // The compact form carries the contorsion; the other forms are Riemannian and are
    // shifted by 𝒬̄_j + (S̄ − S) g_j before comparing. Other contorsions use the metric alone.
    let plain;
    let m = match m.contorsion.kind() {
        ContorsionKind::Zero | ContorsionKind::Statistical { .. } => m,
        _ => {
            plain = ModelSpec { contorsion: Contorsion::zero(m.dim()), ..m.clone() };
            &plain
        }
    };
    let mut t = MaxTable::default();
    for p in pts {
        let mp = m.at(p, 3)?;
        let ca = ContorsionAt::for_contorsion(&mp, &m.contorsion)?;
        let shift_s = ca.bar_mixed_scalar().total - mp.mixed_scalar().total;
        for j in 0..m.splitting.k() {
            let c = el_residual_at(&mp, m, j, ElForm::Compact, Some(0.3))?;
            let mut shift = barq_tensor(&ca, j);
            let n = mp.dim();
            for a in 0..n {
                for b in 0..a {
                    let v = 0.5 * (shift[a * n + b] + shift[b * n + a]);
                    shift[a * n + b] = v;
                    shift[b * n + a] = v;
                }
            }
            for a in mp.frame.ranges[j].clone() {
                shift[a * n + a] += mp.eps(a) * shift_s;
            }
            for form in [ElForm::Unconstrained, ElForm::Expanded, ElForm::ExpandedRicci] {
                let o = el_residual_at(&mp, m, j, form, Some(0.3))?;
                let d = c
                    .residual
                    .iter()
                    .zip(&o.residual)
                    .zip(&shift)
                    .fold(0.0_f64, |a, ((x, y), z)| a.max((x - y - z).abs()));
                t.push(&format!("compact against {} form", format!("{form:?}").to_lowercase()), d);
            }
        }
    }
    let mut out: Vec<CheckEntry> = t
        .0
        .into_iter()
        .map(|(name, v)| {
            pointwise(format!("euler-lagrange:{}", slug(&name)), "agreement of Euler-Lagrange forms", v, cfg.tolerances.euler_lagrange, m, pts.len())
        })
        .collect();
    if m.family == Family::Flat {
        let r = el_report(m, pts, ElForm::Compact)?;
        let res = r.blocks.iter().fold(0.0_f64, |a, b| a.max(b.max_residual));
        let dev = r.blocks.iter().fold(0.0_f64, |a, b| a.max(b.lambda_deviation).max(b.lambda_mean.abs()));
        out.push(pointwise("euler-lagrange:flat-residual".into(), "flat metric is critical", res, cfg.tolerances.euler_lagrange, m, pts.len()));
        out.push(pointwise("euler-lagrange:flat-multiplier".into(), "flat metric has zero multiplier", dev, 1e-10, m, pts.len()));
    }
    Ok(out)
}

fn semi_symmetric_suite(cfg: &RunConfig, m: &ModelSpec, pts: &[Vec<f64>]) -> RunResult<Vec<CheckEntry>> {
    let ContorsionKind::SemiSymmetric { u } = m.contorsion.kind() else {
        return Err(RunError::Config("semi-symmetric checks need a semi-symmetric contorsion".into()));
    };
    let n = m.dim();
    let mut ricci = 0.0_f64;
    for p in pts {
        let a = semi_symmetric_mixed_ricci(m, p)?;
        let b = semi_symmetric_mixed_ricci_explicit(m, p)?;
        ricci = a.ricci.iter().zip(&b.ricci).fold(ricci, |r, (x, y)| r.max((x - y).abs()));
    }
    let vpts = m.sample_points(cfg.variation_points, cfg.seed.wrapping_add(2));
    let plain = ModelSpec { contorsion: Contorsion::zero(n), ..m.clone() };
    let probe = VectorFieldDef::new(
        (0..n)
            .map(|c| Expr::coord((c + 1) % n).sin() + Expr::constant(0.3 + 0.1 * c as f64))
            .collect(),
    );
    let mut metric_fd = 0.0_f64;
    let mut u_fd = 0.0_f64;
    for (s, p) in vpts.iter().enumerate() {
        for j in 0..m.splitting.k() {
            let fam = VariationFamily::sample(&m.splitting, j, cfg.seed.wrapping_add(7 + s as u64 * 31 + j as u64))?;
            let a = analytic_semi_symmetric_variation(&plain, u, &fam, p)?;
            let o = oracle_semi_symmetric_variation(&plain, u, &fam, p)?;
            metric_fd = a.iter().zip(&o).fold(metric_fd, |r, (x, y)| r.max(rel(*x, *y)));
        }
        let el = semi_symmetric_el(m, p, None)?;
        let mp = m.at(p, 2)?;
        let vf = values(&mp.to_frame(&probe.jets(p, 1)?));
        u_fd = u_fd.max(rel(mp.dot(&el.u_gradient, &vf), oracle_u_derivative(m, &probe, p)?));
    }
    let tol = cfg.tolerances.semi_symmetric;
    Ok(vec![
        pointwise("semi-symmetric:explicit-mixed-ricci".into(), "explicit mixed Ricci tensor", ricci, tol, m, pts.len()),
        pointwise("semi-symmetric:metric-variation".into(), "metric variation of contorted Q", metric_fd, cfg.tolerances.variation, m, vpts.len()),
        pointwise("semi-symmetric:field-variation".into(), "variation in the vector field", u_fd, cfg.tolerances.variation, m, vpts.len()),
    ])
}

/// Runs every selected suite and assembles the report.
pub fn run(cfg: &RunConfig) -> RunResult<VerificationReport> {
    cfg.validate()?;
    let m = build_model(&cfg.model, cfg.contorsion.as_ref())?;
    let pts = m.sample_points(cfg.points, cfg.seed);
    let mut report = VerificationReport::default();
    for suite in cfg.suites() {
        match suite {
            CheckKind::Identity => report.checks.extend(identity_suite(cfg, &m, &pts)?),
            CheckKind::Integral => {
                if !m.closed {
                    if cfg.explicit(CheckKind::Integral) {
                        return Err(RunError::Config(format!("integral checks need a closed model, {} is not", m.name)));
                    }
                    continue;
                }
                report.extend(integral_suite(cfg, &m)?);
            }
            CheckKind::Variation => report.checks.extend(variation_suite(cfg, &m)?),
            CheckKind::EulerLagrange => report.checks.extend(euler_lagrange_suite(cfg, &m, &pts)?),
            CheckKind::SemiSymmetric => {
                if !matches!(m.contorsion.kind(), ContorsionKind::SemiSymmetric { .. }) && !cfg.explicit(CheckKind::SemiSymmetric) {
                    continue;
                }
                report.checks.extend(semi_symmetric_suite(cfg, &m, &pts)?);
            }
            CheckKind::All => unreachable!(),
        }
    }
    Ok(report)
}

//! Periodic quadrature on torus models, the integral formulas, and numerical
//! checks of the hypotheses of the splitting theorems.

use rayon::prelude::*;
use serde::Serialize;

use crate::connections::{ContorsionAt, ContorsionKind};
use crate::error::{GeometryError, Result};
use crate::geometry::{MetricField, VectorFieldDef};
use crate::jet::Jet;
use crate::models::ModelSpec;
use crate::multiproduct::{values, Dist, MultiPoint};

/// Smallest admissible number of nodes per axis.
pub const MIN_NODES: usize = 8;

/// Tensor-product grid of equally spaced nodes on a period box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub nodes: Vec<usize>,
    pub origin: Vec<f64>,
    pub periods: Vec<f64>,
}

impl GridSpec {
    pub fn new(nodes: Vec<usize>, origin: Vec<f64>, periods: Vec<f64>) -> Result<GridSpec> {
        if nodes.len() != periods.len() || nodes.len() != origin.len() {
            return Err(GeometryError::Invalid("grid axes do not match".into()));
        }
        if let Some(&n) = nodes.iter().find(|&&n| n < MIN_NODES) {
            return Err(GeometryError::Invalid(format!("grid needs at least {MIN_NODES} nodes per axis, got {n}")));
        }
        if periods.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(GeometryError::Invalid("grid periods must be positive".into()));
        }
        Ok(GridSpec { nodes, origin, periods })
    }

    /// `n` nodes per axis on the period box of a closed model.
    pub fn for_model(model: &ModelSpec, n: usize) -> Result<GridSpec> {
        if !model.closed {
            return Err(GeometryError::Invalid(format!("{} is not a closed model", model.name)));
        }
        GridSpec::new(
            vec![n; model.dim()],
            model.domain.iter().map(|d| d.0).collect(),
            model.domain.iter().map(|d| d.1 - d.0).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.nodes.iter().zip(&self.periods).map(|(&n, &l)| l / n as f64).product()
    }

    /// Node with linear index `idx`, the first axis varying slowest.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut r = idx;
        let mut p = vec![0.0; self.dim()];
        for d in (0..self.dim()).rev() {
            let k = r % self.nodes[d];
            r /= self.nodes[d];
            p[d] = self.origin[d] + self.periods[d] * k as f64 / self.nodes[d] as f64;
        }
        p
    }

    pub fn refined(&self) -> GridSpec {
        GridSpec {
            nodes: self.nodes.iter().map(|n| 2 * n).collect(),
            ..self.clone()
        }
    }

    pub fn coarsened(&self) -> Option<GridSpec> {
        let nodes: Vec<usize> = self.nodes.iter().map(|n| n / 2).collect();
        GridSpec::new(nodes, self.origin.clone(), self.periods.clone()).ok()
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Evaluates `f` at every node (in parallel) and returns the samples in index order.
pub fn sample_grid<F>(grid: &GridSpec, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            let v = f(&p)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinite(format!("integrand at {p:?}")));
            }
            Ok(v)
        })
        .collect()
}

/// Trapezoidal integrals of each component of `f` against `dvol_g`.
pub fn integrate_many<F>(metric: &MetricField, grid: &GridSpec, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let samples = sample_grid(grid, |p| {
        let w = metric.at(p, 0)?.volume_density();
        Ok(f(p)?.into_iter().map(|x| x * w).collect())
    })?;
    Ok(column_integrals(&samples, grid))
}

fn column_integrals(samples: &[Vec<f64>], grid: &GridSpec) -> Vec<f64> {
    let m = samples.first().map_or(0, Vec::len);
    let cell = grid.cell_volume();
    (0..m)
        .map(|c| {
            let col: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            cell * pairwise_sum(&col)
        })
        .collect()
}

/// `∫ f dvol_g` by the periodic trapezoidal rule.
pub fn integrate<F>(metric: &MetricField, grid: &GridSpec, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    Ok(integrate_many(metric, grid, |p| Ok(vec![f(p)?]))?[0])
}

/// One named check of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEntry {
    pub id: String,
    /// Name of the identity or formula checked.
    pub equation: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: Vec<usize>,
    pub model: String,
    pub points: usize,
}

/// Values of one integral at successive grid sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceEntry {
    pub id: String,
    pub pairs: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckEntry>,
    pub convergence: Vec<ConvergenceEntry>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.convergence.extend(other.convergence);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn entry(id: &str, equation: &str, value: f64, tolerance: f64, grid: &GridSpec, model: &ModelSpec) -> CheckEntry {
    CheckEntry {
        id: id.to_string(),
        equation: equation.to_string(),
        value,
        tolerance,
        pass: value.abs() <= tolerance,
        grid: grid.nodes.clone(),
        model: model.name.clone(),
        points: grid.len(),
    }
}

/// `|∫ Div X dvol| ≤ tol · max(1, ∫|X| dvol)` for `X` given at each point as chart jets.
pub fn divergence_theorem_check_with<F>(
    model: &ModelSpec,
    grid: &GridSpec,
    id: &str,
    field: F,
    tol: f64,
) -> Result<CheckEntry>
where
    F: Fn(&MultiPoint) -> Result<Vec<Jet>> + Sync,
{
    let v = integrate_many(&model.metric, grid, |p| {
        let mp = model.at(p, 2)?;
        let x = field(&mp)?;
        let norm = mp.geo.inner(&x, &x).value().abs().sqrt();
        Ok(vec![mp.geo.div(&x).value(), norm])
    })?;
    Ok(entry(id, "divergence theorem", v[0], tol * v[1].max(1.0), grid, model))
}

/// Divergence theorem for an expression vector field.
pub fn divergence_theorem_check(
    model: &ModelSpec,
    grid: &GridSpec,
    x: &VectorFieldDef,
    tol: f64,
) -> Result<CheckEntry> {
    divergence_theorem_check_with(model, grid, "divergence:field", |mp| x.jets(mp.geo.point(), 1), tol)
}

/// `Σ_i (H_i + H_i^⊥)` as chart jets.
pub fn mean_curvature_sum(mp: &MultiPoint) -> Vec<Jet> {
    let ex = mp.extrinsic();
    let n = mp.dim();
    let mut v = vec![Jet::zero(n, ex.blocks[0].mean[0].order()); n];
    for i in 0..mp.k() {
        for c in 0..n {
            v[c] += &ex.blocks[i].mean[c];
            v[c] += &ex.perps[i].mean[c];
        }
    }
    mp.to_chart(&v)
}

/// Integral formulas available on closed models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IntegralKind {
    /// `∫ (2 S_mix − Σ Q(D_i)) = 0`.
    MixedScalar,
    /// `∫ (2 S̄_mix − Σ (Q(D_i) + Q̄(D_i))) = 0` for any contorsion.
    MetricAffine,
    /// The statistical reduction `Q̄ = ⟨tr_D 𝕀, tr_{D^⊥} 𝕀⟩ − ½⟨𝕀, 𝕀⟩|_V`.
    Statistical,
    /// `∫ (2 Σ σ₂(F_i) − S) = 0` for `n` one-dimensional blocks.
    SigmaTwoTotal,
    /// `∫ (σ₂ − ½ Ric(N, N)) = 0` for the leaves orthogonal to a one-dimensional block.
    SigmaTwo { block: usize },
}

impl IntegralKind {
    pub fn label(&self) -> String {
        match self {
            IntegralKind::MixedScalar => "integral of mixed scalar curvature".into(),
            IntegralKind::MetricAffine => "integral of contorted mixed scalar curvature".into(),
            IntegralKind::Statistical => "integral formula, statistical reduction".into(),
            IntegralKind::SigmaTwoTotal => "total sigma_2 against scalar curvature".into(),
            IntegralKind::SigmaTwo { block } => format!("total sigma_2 of leaves normal to block {block}"),
        }
    }

    fn id(&self) -> String {
        match self {
            IntegralKind::MixedScalar => "integral:mixed".into(),
            IntegralKind::MetricAffine => "integral:metric-affine".into(),
            IntegralKind::Statistical => "integral:statistical".into(),
            IntegralKind::SigmaTwoTotal => "integral:sigma2-total".into(),
            IntegralKind::SigmaTwo { block } => format!("integral:sigma2-block{block}"),
        }
    }
}

/// `(integrand, divergence, positive-part scale)` of each formula at one point.
fn formula_samples(kinds: &[IntegralKind], model: &ModelSpec, mp: &MultiPoint) -> Result<Vec<[f64; 3]>> {
    let k = mp.k();
    let xi = mean_curvature_sum(mp);
    let div_h = mp.geo.div(&xi).value();
    let q: Vec<f64> = (0..k).map(|i| mp.q_function(i)).collect();
    let s_mix = mp.mixed_scalar().total;
    let needs_contorsion = kinds
        .iter()
        .any(|k| matches!(k, IntegralKind::MetricAffine | IntegralKind::Statistical));
    let ca = if needs_contorsion {
        Some(ContorsionAt::for_contorsion(mp, &model.contorsion)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        out.push(match kind {
            IntegralKind::MixedScalar => {
                let sq: f64 = q.iter().sum();
                [2.0 * s_mix - sq, div_h, 2.0 * s_mix.abs() + q.iter().map(|x| x.abs()).sum::<f64>()]
            }
            IntegralKind::MetricAffine | IntegralKind::Statistical => {
                let ca = ca.as_ref().expect("contorsion evaluated");
                let s_bar = ca.bar_mixed_scalar().total;
                let bq: Vec<f64> = if kind == IntegralKind::Statistical {
                    if !matches!(model.contorsion.kind(), ContorsionKind::Statistical { .. } | ContorsionKind::Zero) {
                        return Err(GeometryError::Invalid("statistical formula needs a statistical contorsion".into()));
                    }
                    (0..k)
                        .map(|i| {
                            let mask = mp.mask(&Dist::Block(i));
                            let comp: Vec<bool> = mask.iter().map(|x| !x).collect();
                            let a = values(&ca.trace(&mask, false));
                            let b = values(&ca.trace(&comp, false));
                            mp.dot(&a, &b) - 0.5 * ca.norm_restricted(&mask)
                        })
                        .collect()
                } else {
                    (0..k).map(|i| ca.bar_q(i)).collect()
                };
                let mut field = mp.to_frame(&xi);
                for i in 0..k {
                    let f = ca.bar_q_divergence_field(&mp.mask(&Dist::Block(i)));
                    for c in 0..mp.dim() {
                        field[c] += &f[c];
                    }
                }
                let div = mp.div_frame(&field).value();
                let sum: f64 = q.iter().zip(&bq).map(|(a, b)| a + b).sum();
                let scale = 2.0 * s_bar.abs() + q.iter().chain(&bq).map(|x| x.abs()).sum::<f64>();
                [2.0 * s_bar - sum, div, scale]
            }
            IntegralKind::SigmaTwoTotal => {
                if mp.block_dims().iter().any(|&d| d != 1) {
                    return Err(GeometryError::Invalid("total sigma_2 formula needs one-dimensional blocks".into()));
                }
                let s = scalar_curvature(mp);
                let sig: f64 = (0..k).map(|i| mp.sigma_elementary(i, 2)).sum::<Result<f64>>()?;
                [2.0 * sig - s, -div_h, 2.0 * sig.abs() + s.abs()]
            }
            IntegralKind::SigmaTwo { block } => {
                if block >= k || mp.block_dims()[block] != 1 {
                    return Err(GeometryError::Invalid("sigma_2 formula needs a one-dimensional block".into()));
                }
                let sig = mp.sigma_elementary(block, 2)?;
                let a = mp.frame.ranges[block].start;
                let ric = mp.partial_ricci_dual(block)[a * mp.dim() + a];
                let ex = mp.extrinsic();
                let v: Vec<Jet> = (0..mp.dim())
                    .map(|c| &ex.blocks[block].mean[c] + &ex.perps[block].mean[c])
                    .collect();
                let div = mp.div_frame(&v).value();
                [sig - 0.5 * ric, -0.5 * div, sig.abs() + 0.5 * ric.abs()]
            }
        });
    }
    Ok(out)
}

/// `S = Σ ε_a ε_b ⟨R_{E_a,E_b}E_a, E_b⟩`.
pub fn scalar_curvature(mp: &MultiPoint) -> f64 {
    let n = mp.dim();
    let rf = mp.frame_curvature();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += mp.eps(a) * mp.eps(b) * rf[((a * n + b) * n + a) * n + b];
        }
    }
    s
}

/// Per formula: the integrals of `(integrand, divergence, scale)` and the
/// largest pointwise gap between integrand and divergence.
fn formula_integrals(kinds: &[IntegralKind], model: &ModelSpec, grid: &GridSpec) -> Result<Vec<(Vec<f64>, f64)>> {
    let samples = sample_grid(grid, |p| {
        let mp = model.at(p, 3)?;
        let w = mp.geo.volume_density();
        let mut row = Vec::with_capacity(4 * kinds.len());
        for s in formula_samples(kinds, model, &mp)? {
            row.extend([s[0] * w, s[1] * w, s[2] * w, (s[0] - s[1]).abs()]);
        }
        Ok(row)
    })?;
    let ints = column_integrals(&samples, grid);
    Ok((0..kinds.len())
        .map(|f| {
            let pointwise = samples.iter().fold(0.0_f64, |m, s| m.max(s[4 * f + 3]));
            (ints[4 * f..4 * f + 3].to_vec(), pointwise)
        })
        .collect())
}

/// Both routes of each integral formula: the integral of the algebraic combination
/// and the integral of the equivalent divergence, plus their pointwise agreement.
/// All formulas share one pass over the grid. When `converge` is set the grid is
/// also halved (and doubled if a value is above `floor`) to record quadrature
/// convergence.
pub fn integral_formula_checks(
    kinds: &[IntegralKind],
    model: &ModelSpec,
    grid: &GridSpec,
    tol: f64,
    converge: Option<f64>,
) -> Result<VerificationReport> {
    if !model.closed {
        return Err(GeometryError::Invalid(format!("{} is not closed", model.name)));
    }
    let main = formula_integrals(kinds, model, grid)?;
    let scales: Vec<f64> = main.iter().map(|m| m.0[2].max(1.0)).collect();
    let coarse = match (converge, grid.coarsened()) {
        (Some(_), Some(c)) => Some((c.nodes[0], formula_integrals(kinds, model, &c)?)),
        _ => None,
    };
    let fine = match converge {
        Some(floor) if main.iter().zip(&scales).any(|(m, s)| m.0[0].abs() > floor * s) => {
            let f = grid.refined();
            Some((f.nodes[0], formula_integrals(kinds, model, &f)?))
        }
        _ => None,
    };
    let mut report = VerificationReport::default();
    for (f, kind) in kinds.iter().enumerate() {
        let (ints, pointwise) = &main[f];
        let scale = scales[f];
        let id = kind.id();
        let label = kind.label();
        report.checks.push(entry(&format!("{id}:integrand"), &label, ints[0], tol * scale, grid, model));
        report.checks.push(entry(&format!("{id}:divergence"), &label, ints[1], tol * scale, grid, model));
        report.checks.push(entry(&format!("{id}:routes-pointwise"), &label, *pointwise, 1e-7 * scale, grid, model));
        if converge.is_none() {
            continue;
        }
        let mut pairs = Vec::new();
        if let Some((n, c)) = &coarse {
            pairs.push((*n, c[f].0[0]));
        }
        pairs.push((grid.nodes[0], ints[0]));
        if let Some((n, c)) = &fine {
            pairs.push((*n, c[f].0[0]));
        }
        if pairs.len() >= 2 {
            let change = (pairs[pairs.len() - 1].1 - pairs[pairs.len() - 2].1).abs();
            report.checks.push(entry(&format!("{id}:refinement"), &label, change, tol * scale, grid, model));
        }
        report.convergence.push(ConvergenceEntry { id, pairs });
    }
    Ok(report)
}

/// [`integral_formula_checks`] for a single formula.
pub fn integral_formula_check(
    kind: IntegralKind,
    model: &ModelSpec,
    grid: &GridSpec,
    tol: f64,
    converge: Option<f64>,
) -> Result<VerificationReport> {
    integral_formula_checks(&[kind], model, grid, tol, converge)
}

/// Integrates the formula's integrand plus a constant `offset`; the entry passes
/// when the perturbation is detected, i.e. the perturbed integral exceeds the tolerance.
pub fn negative_control(
    kind: IntegralKind,
    model: &ModelSpec,
    grid: &GridSpec,
    tol: f64,
    offset: f64,
) -> Result<CheckEntry> {
    let samples = sample_grid(grid, |p| {
        let mp = model.at(p, 3)?;
        let w = mp.geo.volume_density();
        let s = formula_samples(&[kind], model, &mp)?[0];
        Ok(vec![(s[0] + offset) * w, s[2] * w])
    })?;
    let ints = column_integrals(&samples, grid);
    let tolerance = tol * ints[1].max(1.0);
    let mut e = entry(&format!("{}:negative-control", kind.id()), &kind.label(), ints[0], tolerance, grid, model);
    e.pass = ints[0].abs() > tolerance;
    Ok(e)
}

/// Numerically evaluated hypotheses of the splitting and leaf theorems.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub model: String,
    pub grid: Vec<usize>,
    pub riemannian: bool,
    pub statistical_adapted: bool,
    /// Per block, max over the grid.
    pub integrability: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub umbilicity: Vec<f64>,
    /// Per pair `(i, j)`, max residuals of mixed total geodesy and mixed integrability.
    pub mixed_pairs: Vec<(usize, usize, f64, f64)>,
    /// Max `|⟨H_i, H_j⟩|` over `i ≠ j`.
    pub mean_orthogonality: f64,
    /// Max `|P_j^⊥ H_i|` for the best harmonic block `j` (all `i ≠ j`).
    pub harmonic_block: Option<usize>,
    pub s_bar_min: f64,
    pub s_bar_max: f64,
    /// Each theorem and whether its hypotheses hold.
    pub theorems: Vec<(String, bool, String)>,
}

impl HypothesisReport {
    pub fn satisfied(&self) -> Vec<&str> {
        self.theorems.iter().filter(|t| t.1).map(|t| t.0.as_str()).collect()
    }
}

/// Evaluates each hypothesis on the grid and reports which theorem applies;
/// conclusions are quoted, not computed.
pub fn splitting_hypothesis_report(model: &ModelSpec, grid: &GridSpec, tol: f64) -> Result<HypothesisReport> {
    let k = model.splitting.k();
    let dims = model.splitting.block_dims();
    let n = model.dim();
    let per_point = sample_grid(grid, |p| {
        let mp = model.at(p, 2)?;
        let ex = mp.extrinsic();
        let ca = ContorsionAt::for_contorsion(&mp, &model.contorsion)?;
        let mut out = Vec::new();
        for i in 0..k {
            let s = &ex.blocks[i];
            out.push(values(&s.t).iter().fold(0.0_f64, |m, x| m.max(x.abs())));
            let h = values(&s.mean);
            out.push(h.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
            let hv = values(&s.h);
            let mut umb = 0.0_f64;
            for a in mp.frame.ranges[i].clone() {
                for b in mp.frame.ranges[i].clone() {
                    for c in 0..n {
                        let g = if a == b { mp.eps(a) } else { 0.0 };
                        umb = umb.max((hv[(a * n + b) * n + c] - g * h[c] / dims[i] as f64).abs());
                    }
                }
            }
            out.push(umb);
        }
        for i in 0..k {
            for j in i + 1..k {
                let f = mp.mixed_pair_flags(i, j, tol);
                out.push(f.h_residual);
                out.push(f.t_residual);
            }
        }
        let means: Vec<Vec<f64>> = (0..k).map(|i| values(&ex.blocks[i].mean)).collect();
        let mut orth = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    orth = orth.max(mp.dot(&means[i], &means[j]).abs());
                }
            }
        }
        out.push(orth);
        // For each j: max |H_j| + max_{i≠j} |P_j^⊥ H_i|.
        for j in 0..k {
            let mask = mp.mask(&Dist::Block(j));
            let mut d = means[j].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for (i, h) in means.iter().enumerate() {
                if i != j {
                    for c in (0..n).filter(|&c| !mask[c]) {
                        d = d.max(h[c].abs());
                    }
                }
            }
            out.push(d);
        }
        out.push(ca.bar_mixed_scalar().total);
        out.push(ca.adapted_defect().max(ca.statistical_defect()));
        out.push(if mp.frame.eps.iter().all(|&e| e > 0.0) { 0.0 } else { 1.0 });
        Ok(out)
    })?;
    let m = per_point[0].len();
    let maxes: Vec<f64> = (0..m)
        .map(|c| per_point.iter().fold(0.0_f64, |a, s| a.max(s[c].abs())))
        .collect();
    let s_idx = m - 3;
    let s_bar_min = per_point.iter().fold(f64::INFINITY, |a, s| a.min(s[s_idx]));
    let s_bar_max = per_point.iter().fold(f64::NEG_INFINITY, |a, s| a.max(s[s_idx]));
    let statistical_adapted = maxes[m - 2] <= tol;
    let riemannian = maxes[m - 1] == 0.0;
    let integrability: Vec<f64> = (0..k).map(|i| maxes[3 * i]).collect();
    let mean_curvature: Vec<f64> = (0..k).map(|i| maxes[3 * i + 1]).collect();
    let umbilicity: Vec<f64> = (0..k).map(|i| maxes[3 * i + 2]).collect();
    let mut mixed_pairs = Vec::new();
    let mut c = 3 * k;
    for i in 0..k {
        for j in i + 1..k {
            mixed_pairs.push((i, j, maxes[c], maxes[c + 1]));
            c += 2;
        }
    }
    let mean_orthogonality = maxes[c];
    let harmonic: Vec<f64> = (0..k).map(|j| maxes[c + 1 + j]).collect();
    let harmonic_block = (0..k).find(|&j| harmonic[j] <= tol);

    let integrable = integrability.iter().all(|&x| x <= tol);
    let harmonic_all = mean_curvature.iter().all(|&x| x <= tol);
    let mixed_int = mixed_pairs.iter().all(|p| p.3 <= tol);
    let mixed_tg = mixed_pairs.iter().all(|p| p.2 <= tol);
    let umbilical = umbilicity.iter().all(|&x| x <= tol);
    let base = riemannian && statistical_adapted;
    let theorems = vec![
        (
            "integrable harmonic mixed-integrable blocks with nonnegative mixed scalar curvature".to_string(),
            base && integrable && harmonic_all && mixed_int && s_bar_min >= -tol,
            if model.family == crate::models::Family::Flat {
                "splits (trivially verified: product metric)".to_string()
            } else {
                "the manifold splits (locally a direct product)".to_string()
            },
        ),
        (
            "closed multiply twisted product, umbilical mixed totally geodesic blocks, orthogonal mean curvatures, nonpositive mixed scalar curvature".to_string(),
            base && model.closed
                && matches!(model.family, crate::models::Family::MultiplyTwisted { .. } | crate::models::Family::MultiplyWarped { .. } | crate::models::Family::Flat)
                && umbilical
                && mixed_tg
                && mean_orthogonality <= tol
                && s_bar_max <= tol,
            "the manifold is a direct product".to_string(),
        ),
        (
            "integrable mixed-integrable blocks, one harmonic block containing the other mean curvatures, positive mixed scalar curvature".to_string(),
            base && integrable && mixed_int && harmonic_block.is_some() && s_bar_min > tol,
            "the foliation of the harmonic block has no compact leaves".to_string(),
        ),
    ];
    Ok(HypothesisReport {
        model: model.name.clone(),
        grid: grid.nodes.clone(),
        riemannian,
        statistical_adapted,
        integrability,
        mean_curvature,
        umbilicity,
        mixed_pairs,
        mean_orthogonality,
        harmonic_block,
        s_bar_min,
        s_bar_max,
        theorems,
    })
}

//! Levi-Civita data of a metric on a single chart.
//!
//! Everything is evaluated on jets around a base point: the metric is expanded
//! to some order `o`, Christoffel symbols then carry order `o - 1` and the
//! curvature order `o - 2`. Callers pick `o` according to how many further
//! derivatives they intend to take.
//!
//! The curvature follows the sign convention `R_{X,Y} = [∇_Y, ∇_X] + ∇_{[X,Y]}`,
//! so that `⟨R_{E_a,E_b}E_a, E_b⟩` is the sectional curvature of an
//! orthonormal pair.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::expr::{parse_with_params, Expr};
use crate::jet::Jet;

/// Condition number above which a metric is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// A symmetric (0,2) field of expressions over named chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    coords: Vec<String>,
    entries: Vec<Expr>,
    signature: Option<Vec<i8>>,
}

impl MetricField {
    /// `entries` must be a symmetric `n × n` array.
    pub fn new(coords: Vec<String>, entries: Vec<Vec<Expr>>) -> Result<MetricField> {
        let n = coords.len();
        if n < 2 {
            return Err(GeometryError::Invalid("chart dimension must be at least 2".into()));
        }
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(GeometryError::Invalid(format!("metric must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(GeometryError::Invalid(format!(
                        "metric entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        let names: Vec<String> = coords.clone();
        let entries = entries
            .into_iter()
            .flatten()
            .map(|e| e.with_coord_names(&names))
            .collect();
        Ok(MetricField {
            coords,
            entries,
            signature: None,
        })
    }

    pub fn diagonal(coords: Vec<String>, diag: Vec<Expr>) -> Result<MetricField> {
        let n = diag.len();
        let mut rows = vec![vec![Expr::zero(); n]; n];
        for (i, d) in diag.into_iter().enumerate() {
            rows[i][i] = d;
        }
        MetricField::new(coords, rows)
    }

    /// Parses entries written as strings; a missing lower triangle is not allowed.
    pub fn parse(
        coords: &[&str],
        rows: &[Vec<String>],
        params: &BTreeMap<String, f64>,
    ) -> Result<MetricField> {
        let entries = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse_with_params(s, coords, params))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        MetricField::new(coords.iter().map(|s| s.to_string()).collect(), entries)
    }

    /// Declares the expected signs; checked at every evaluation.
    pub fn with_signature(mut self, signature: Vec<i8>) -> Result<MetricField> {
        if signature.len() != self.dim() || signature.iter().any(|s| s.abs() != 1) {
            return Err(GeometryError::Invalid("signature must list ±1 per coordinate".into()));
        }
        self.signature = Some(signature);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim() + j]
    }

    pub fn signature(&self) -> Option<&[i8]> {
        self.signature.as_deref()
    }

    /// Jets of all `n²` entries, row-major.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.dim();
        let mut out: Vec<Jet> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    let v = out[j * n + i].clone();
                    out.push(v);
                } else {
                    out.push(self.entry(i, j).eval_jet(p, order)?);
                }
            }
        }
        Ok(out)
    }

    /// Full Levi-Civita data at `p`, metric expanded to `order`.
    pub fn at(&self, p: &[f64], order: usize) -> Result<PointGeometry> {
        if p.len() != self.dim() {
            return Err(GeometryError::Invalid(format!(
                "point has {} coordinates, chart has {}",
                p.len(),
                self.dim()
            )));
        }
        let geo = PointGeometry::new(p, self.jets(p, order)?)?;
        if let Some(sig) = &self.signature {
            let found = geo.inertia();
            let expected_neg = sig.iter().filter(|&&s| s < 0).count();
            let found_neg = found.iter().filter(|&&s| s < 0).count();
            if expected_neg != found_neg {
                let mut expected = sig.clone();
                expected.sort();
                return Err(GeometryError::Signature {
                    point: p.to_vec(),
                    expected,
                    found,
                });
            }
        }
        Ok(geo)
    }
}

/// A contravariant vector field given by chart-component expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldDef {
    pub components: Vec<Expr>,
}

impl VectorFieldDef {
    pub fn new(components: Vec<Expr>) -> VectorFieldDef {
        VectorFieldDef { components }
    }

    /// The coordinate field `∂_i` in dimension `n`.
    pub fn coordinate(n: usize, i: usize) -> VectorFieldDef {
        VectorFieldDef {
            components: (0..n)
                .map(|k| if k == i { Expr::one() } else { Expr::zero() })
                .collect(),
        }
    }

    pub fn parse(
        coords: &[&str],
        comps: &[String],
        params: &BTreeMap<String, f64>,
    ) -> Result<VectorFieldDef> {
        let components = comps
            .iter()
            .map(|s| parse_with_params(s, coords, params))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(VectorFieldDef { components })
    }

    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        Ok(self
            .components
            .iter()
            .map(|e| e.eval_jet(p, order))
            .collect::<std::result::Result<Vec<_>, _>>()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Slot {
    Up,
    Down,
}

/// Plain numeric tensor at a point, components in chart indices (row-major,
/// slots in the listed order).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorValue {
    pub variance: Vec<Slot>,
    pub dim: usize,
    pub components: Vec<f64>,
    pub point: Vec<f64>,
}

impl TensorValue {
    pub fn from_jets(variance: Vec<Slot>, dim: usize, jets: &[Jet], point: &[f64]) -> TensorValue {
        TensorValue {
            variance,
            dim,
            components: jets.iter().map(Jet::value).collect(),
            point: point.to_vec(),
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut k = 0;
        for &i in idx {
            k = k * self.dim + i;
        }
        self.components[k]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Inverts a matrix of jets by Gaussian elimination with partial pivoting on
/// the constant terms.
pub fn invert_jet_matrix(m: &[Jet], n: usize) -> Option<Vec<Jet>> {
    let dim = m[0].dim();
    let order = m.iter().map(Jet::order).min().unwrap_or(0);
    let mut a: Vec<Jet> = m.iter().map(|x| x.truncate(order)).collect();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(dim, order, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| {
            a[r * n + col]
                .value()
                .abs()
                .total_cmp(&a[s * n + col].value().abs())
        })?;
        if a[piv * n + col].value() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let r = a[col * n + col].recip();
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &r;
            inv[col * n + k] = &inv[col * n + k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            if f.coeffs().iter().all(|&c| c == 0.0) {
                continue;
            }
            for k in 0..n {
                let da = &f * &a[col * n + k];
                let di = &f * &inv[col * n + k];
                a[row * n + k] -= &da;
                inv[row * n + k] -= &di;
            }
        }
    }
    Some(inv)
}

/// Levi-Civita data at one point: metric, inverse, Christoffel symbols and
/// (lazily) curvature, all as jets.
pub struct PointGeometry {
    n: usize,
    point: Vec<f64>,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    /// `gamma[(k * n + i) * n + j] = Γ^k_{ij}`, `∇_{∂i}∂j = Γ^k_{ij} ∂k`.
    gamma: Vec<Jet>,
    riemann: OnceLock<Vec<Jet>>,
}

impl std::fmt::Debug for PointGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointGeometry")
            .field("n", &self.n)
            .field("point", &self.point)
            .finish()
    }
}

impl PointGeometry {
    /// Builds the data from metric jets (row-major `n × n`).
    pub fn new(point: &[f64], g: Vec<Jet>) -> Result<PointGeometry> {
        let n = point.len();
        if g.len() != n * n {
            return Err(GeometryError::Invalid("metric jet array has wrong size".into()));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("metric".into()));
        }
        let values = DMatrix::from_fn(n, n, |i, j| g[i * n + j].value());
        let sv = values.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin == 0.0 { f64::INFINITY } else { smax / smin };
        if !(condition < SINGULAR_CONDITION) {
            return Err(GeometryError::SingularMetric {
                point: point.to_vec(),
                condition,
            });
        }
        let ginv = invert_jet_matrix(&g, n).ok_or_else(|| GeometryError::SingularMetric {
            point: point.to_vec(),
            condition,
        })?;
        let order = g.iter().map(Jet::order).min().unwrap_or(0);
        let mut gamma = Vec::with_capacity(n * n * n);
        if order == 0 {
            gamma.resize(n * n * n, Jet::zero(n, 0));
        } else {
            // dg[(l * n + i) * n + j] = ∂_l g_ij
            let dg: Vec<Jet> = (0..n)
                .flat_map(|l| g.iter().map(move |x| x.derivative(l)))
                .collect();
            let d = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
            let mut lower = Vec::with_capacity(n * n * n);
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let s = &(d(i, l, j) + d(j, l, i)) - d(l, i, j);
                        lower.push(s.scale(0.5));
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = Jet::zero(n, order - 1);
                        for l in 0..n {
                            acc.add_product(&ginv[k * n + l], &lower[(l * n + i) * n + j]);
                        }
                        gamma.push(acc);
                    }
                }
            }
        }
        Ok(PointGeometry {
            n,
            point: point.to_vec(),
            g,
            ginv,
            gamma,
            riemann: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Order of the metric jets.
    pub fn order(&self) -> usize {
        self.g[0].order()
    }

    pub fn metric(&self, i: usize, j: usize) -> &Jet {
        &self.g[i * self.n + j]
    }

    pub fn metric_inv(&self, i: usize, j: usize) -> &Jet {
        &self.ginv[i * self.n + j]
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.gamma[(k * self.n + i) * self.n + j]
    }

    pub fn christoffel_jets(&self) -> &[Jet] {
        &self.gamma
    }

    /// Signs of the eigenvalues of the metric at the base point, sorted.
    pub fn inertia(&self) -> Vec<i8> {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| self.g[i * n + j].value());
        let mut s: Vec<i8> = m
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&l| if l < 0.0 { -1 } else { 1 })
            .collect();
        s.sort();
        s
    }

    /// `√|det g|` at the base point.
    pub fn volume_density(&self) -> f64 {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| self.g[i * n + j].value())
            .determinant()
            .abs()
            .sqrt()
    }

    pub fn zero(&self, order: usize) -> Jet {
        Jet::zero(self.n, order)
    }

    pub fn inner(&self, x: &[Jet], y: &[Jet]) -> Jet {
        let n = self.n;
        let order = x.iter().chain(y).map(Jet::order).min().unwrap_or(0).min(self.order());
        let mut acc = Jet::zero(n, order);
        for i in 0..n {
            let gx = self.lower_component(x, i);
            acc.add_product(&gx, &y[i]);
        }
        acc
    }

    fn lower_component(&self, x: &[Jet], i: usize) -> Jet {
        let n = self.n;
        let order = x.iter().map(Jet::order).min().unwrap_or(0).min(self.order());
        let mut acc = Jet::zero(n, order);
        for j in 0..n {
            acc.add_product(&self.g[i * n + j], &x[j]);
        }
        acc
    }

    /// `X♭` in chart components.
    pub fn lower(&self, x: &[Jet]) -> Vec<Jet> {
        (0..self.n).map(|i| self.lower_component(x, i)).collect()
    }

    /// `ω♯` in chart components.
    pub fn raise(&self, w: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let order = w.iter().map(Jet::order).min().unwrap_or(0).min(self.order());
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero(n, order);
                for j in 0..n {
                    acc.add_product(&self.ginv[i * n + j], &w[j]);
                }
                acc
            })
            .collect()
    }

    /// `∇_X Y`; the result has one order less than `Y`.
    pub fn nabla(&self, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let order = y
            .iter()
            .map(Jet::order)
            .min()
            .unwrap_or(0)
            .min(self.order())
            .saturating_sub(1)
            .min(x.iter().map(Jet::order).min().unwrap_or(0));
        let dy: Vec<Vec<Jet>> = (0..n)
            .map(|i| y.iter().map(|c| c.derivative(i)).collect())
            .collect();
        (0..n)
            .map(|k| {
                let mut acc = Jet::zero(n, order);
                for i in 0..n {
                    let mut inner = dy[i][k].truncate(order);
                    for j in 0..n {
                        inner.add_product(self.christoffel(k, i, j), &y[j]);
                    }
                    acc.add_product(&x[i], &inner);
                }
                acc
            })
            .collect()
    }

    /// `Div X = ∂_k X^k + Γ^k_{kj} X^j`.
    pub fn div(&self, x: &[Jet]) -> Jet {
        let n = self.n;
        let order = x
            .iter()
            .map(Jet::order)
            .min()
            .unwrap_or(0)
            .min(self.order())
            .saturating_sub(1);
        let mut acc = Jet::zero(n, order);
        for k in 0..n {
            acc += x[k].derivative(k);
            for j in 0..n {
                acc.add_product(self.christoffel(k, k, j), &x[j]);
            }
        }
        acc
    }

    /// `riemann()[((i*n + j)*n + k)*n + l] = (R_{∂i,∂j} ∂k)^l`.
    pub fn riemann(&self) -> &[Jet] {
        self.riemann.get_or_init(|| riemann_from_connection(&self.gamma, self.n))
    }

    /// `R_{X,Y} Z` for chart-component vectors.
    pub fn curvature_apply(&self, x: &[Jet], y: &[Jet], z: &[Jet]) -> Vec<Jet> {
        apply_13(self.riemann(), self.n, x, y, z)
    }

    /// `(∇_m P)^k_{ij}` for a (1,2) tensor laid out as `p[(i*n + j)*n + k]`,
    /// returned as `out[((m*n + i)*n + j)*n + k]`.
    pub fn covariant_derivative_12(&self, p: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let order = p
            .iter()
            .map(Jet::order)
            .min()
            .unwrap_or(0)
            .min(self.order())
            .saturating_sub(1);
        let at = |i: usize, j: usize, k: usize| &p[(i * n + j) * n + k];
        let mut out = Vec::with_capacity(n * n * n * n);
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = at(i, j, k).derivative(m).truncate(order);
                        for l in 0..n {
                            acc.add_product(self.christoffel(k, m, l), at(i, j, l));
                            let t1 = self.christoffel(l, m, i) * at(l, j, k);
                            let t2 = self.christoffel(l, m, j) * at(i, l, k);
                            acc -= &t1;
                            acc -= &t2;
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    /// Full divergence of a (1,2) tensor, `(Div P)_{ij} = (∇_k P)^k_{ij}`.
    pub fn div_12(&self, p: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let dp = self.covariant_derivative_12(p);
        let order = dp[0].order();
        (0..n * n)
            .map(|ij| {
                let mut acc = Jet::zero(n, order);
                for k in 0..n {
                    acc += &dp[(k * n * n + ij) * n + k];
                }
                acc
            })
            .collect()
    }

    /// Curvature of `∇ + 𝕀` from the Levi-Civita curvature plus the
    /// contorsion correction `(∇_Y 𝕀)_X − (∇_X 𝕀)_Y + [𝕀_Y, 𝕀_X]`.
    /// `contorsion[(i*n + j)*n + k] = (𝕀_{∂i} ∂j)^k`.
    pub fn bar_riemann(&self, contorsion: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let r = self.riemann();
        let di = self.covariant_derivative_12(contorsion);
        let c = |i: usize, j: usize, k: usize| &contorsion[(i * n + j) * n + k];
        let d = |m: usize, i: usize, j: usize, k: usize| &di[((m * n + i) * n + j) * n + k];
        let order = r[0].order().min(di[0].order());
        let mut out = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = r[((i * n + j) * n + k) * n + l].truncate(order);
                        acc += d(j, i, k, l);
                        acc -= d(i, j, k, l);
                        for m in 0..n {
                            acc.add_product(c(j, m, l), c(i, k, m));
                            let t = c(i, m, l) * c(j, k, m);
                            acc -= &t;
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }
}

/// Curvature (in the convention above) of an arbitrary, possibly
/// non-symmetric, connection with coefficients `gamma[(k*n + i)*n + j]`.
pub fn riemann_from_connection(gamma: &[Jet], n: usize) -> Vec<Jet> {
    let order = gamma[0].order().saturating_sub(1);
    let gm = |k: usize, i: usize, j: usize| &gamma[(k * n + i) * n + j];
    let mut out = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // standard sign: ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}
                    let mut acc = gm(l, j, k).derivative(i).truncate(order);
                    acc -= &gm(l, i, k).derivative(j).truncate(order);
                    for m in 0..n {
                        acc.add_product(gm(l, i, m), gm(m, j, k));
                        let t = gm(l, j, m) * gm(m, i, k);
                        acc -= &t;
                    }
                    out.push(-acc);
                }
            }
        }
    }
    out
}

/// Contracts a (1,3) tensor stored as `t[((i*n + j)*n + k)*n + l]` with three vectors.
pub fn apply_13(t: &[Jet], n: usize, x: &[Jet], y: &[Jet], z: &[Jet]) -> Vec<Jet> {
    let order = t[0]
        .order()
        .min(x.iter().chain(y).chain(z).map(Jet::order).min().unwrap_or(0));
    let mut out = vec![Jet::zero(n, order); n];
    for i in 0..n {
        if is_zero(&x[i]) {
            continue;
        }
        for j in 0..n {
            if is_zero(&y[j]) {
                continue;
            }
            let xy = &x[i] * &y[j];
            for k in 0..n {
                if is_zero(&z[k]) {
                    continue;
                }
                let xyz = &xy * &z[k];
                for l in 0..n {
                    out[l].add_product(&xyz, &t[((i * n + j) * n + k) * n + l]);
                }
            }
        }
    }
    out
}

/// Contracts a (1,2) tensor `p[(i*n + j)*n + k]` with two vectors.
pub fn apply_12(p: &[Jet], n: usize, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let order = p[0]
        .order()
        .min(x.iter().chain(y).map(Jet::order).min().unwrap_or(0));
    let mut out = vec![Jet::zero(n, order); n];
    for i in 0..n {
        if is_zero(&x[i]) {
            continue;
        }
        for j in 0..n {
            if is_zero(&y[j]) {
                continue;
            }
            let xy = &x[i] * &y[j];
            for k in 0..n {
                out[k].add_product(&xy, &p[(i * n + j) * n + k]);
            }
        }
    }
    out
}

pub(crate) fn is_zero(j: &Jet) -> bool {
    j.coeffs().iter().all(|&c| c == 0.0)
}

/// Christoffel symbols `Γ^k_{ij}` at `p`, indices `(k, i, j)`.
pub fn christoffel(g: &MetricField, p: &[f64]) -> Result<TensorValue> {
    let geo = g.at(p, 1)?;
    Ok(TensorValue::from_jets(
        vec![Slot::Up, Slot::Down, Slot::Down],
        g.dim(),
        geo.christoffel_jets(),
        p,
    ))
}

/// Curvature `(R_{∂i,∂j}∂k)^l` at `p`, indices `(i, j, k, l)`.
pub fn riemann(g: &MetricField, p: &[f64]) -> Result<TensorValue> {
    let geo = g.at(p, 2)?;
    Ok(TensorValue::from_jets(
        vec![Slot::Down, Slot::Down, Slot::Down, Slot::Up],
        g.dim(),
        geo.riemann(),
        p,
    ))
}

/// Divergence of an expression-defined vector field at `p`.
pub fn divergence(x: &VectorFieldDef, g: &MetricField, p: &[f64]) -> Result<f64> {
    let geo = g.at(p, 1)?;
    Ok(geo.div(&x.jets(p, 1)?).value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn metric(coords: &[&str], diag: &[&str]) -> MetricField {
        let d = diag
            .iter()
            .map(|s| parse_expression(s, coords).unwrap())
            .collect();
        MetricField::diagonal(coords.iter().map(|s| s.to_string()).collect(), d).unwrap()
    }

    #[test]
    fn flat_metric_has_no_christoffels() {
        let g = metric(&["x", "y", "z"], &["1", "1", "1"]);
        let c = christoffel(&g, &[0.3, 0.1, 2.0]).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        assert_eq!(riemann(&g, &[0.3, 0.1, 2.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn exponential_warp_christoffels_and_curvature() {
        let g = metric(&["x", "y"], &["1", "exp(2*x)"]);
        let p = [0.4, -1.0];
        let c = christoffel(&g, &p).unwrap();
        let e = (0.8f64).exp();
        assert!((c.get(&[0, 1, 1]) + e).abs() < 1e-13);
        assert!((c.get(&[1, 0, 1]) - 1.0).abs() < 1e-13);
        assert!((c.get(&[1, 1, 0]) - 1.0).abs() < 1e-13);
        // sectional curvature −1: ⟨R_{∂x,∂y}∂x, ∂y⟩ / |∂x ∧ ∂y|² with g_yy = e^{2x}
        let r = riemann(&g, &p).unwrap();
        let k = r.get(&[0, 1, 0, 1]);
        assert!((k + 1.0).abs() < 1e-12, "{k}");
    }

    #[test]
    fn sphere_christoffel_and_sign() {
        let g = metric(&["t", "f"], &["1", "sin(t)^2"]);
        let p = [1.1, 0.2];
        let c = christoffel(&g, &p).unwrap();
        assert!((c.get(&[0, 1, 1]) + 1.1f64.sin() * 1.1f64.cos()).abs() < 1e-13);
        // ⟨R_{Eθ,Eφ}Eθ, Eφ⟩ with Eφ = ∂φ / sin θ equals R^φ_{θφθ}·g_φφ / sin²θ
        let r = riemann(&g, &p).unwrap();
        assert!((r.get(&[0, 1, 0, 1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_compatibility_and_bianchi() {
        let g = MetricField::parse(
            &["x", "y", "z"],
            &[
                vec!["2+cos(x)".into(), "0.3*sin(y)".into(), "0".into()],
                vec!["0.3*sin(y)".into(), "1+0.5*sin(x+z)^2".into(), "0.1*cos(z)".into()],
                vec!["0".into(), "0.1*cos(z)".into(), "exp(0.2*sin(x))".into()],
            ],
            &BTreeMap::new(),
        )
        .unwrap();
        let p = [0.7, -0.4, 1.3];
        let geo = g.at(&p, 3).unwrap();
        let n = 3;
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    // ∂_m g_ij − Γ^l_{mi} g_lj − Γ^l_{mj} g_il
                    let mut r = geo.metric(i, j).derivative(m).value();
                    for l in 0..n {
                        r -= geo.christoffel(l, m, i).value() * geo.metric(l, j).value();
                        r -= geo.christoffel(l, m, j).value() * geo.metric(i, l).value();
                    }
                    assert!(r.abs() < 1e-12);
                }
            }
        }
        let rm = geo.riemann();
        let at = |i: usize, j: usize, k: usize, l: usize| rm[((i * n + j) * n + k) * n + l].value();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let b = at(i, j, k, l) + at(j, k, i, l) + at(k, i, j, l);
                        assert!(b.abs() < 1e-11);
                        assert!((at(i, j, k, l) + at(j, i, k, l)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let g = metric(&["x", "y"], &["1", "1"]);
        let x = VectorFieldDef::new(vec![parse_expression("sin(x)*y", &["x", "y"]).unwrap(), Expr::zero()]);
        assert!((divergence(&x, &g, &[0.3, 2.0]).unwrap() - 0.3f64.cos() * 2.0).abs() < 1e-14);
        let c = VectorFieldDef::new(vec![Expr::one(), Expr::constant(2.0)]);
        assert_eq!(divergence(&c, &g, &[0.3, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn jet_matrix_inverse_matches_product() {
        let g = metric(&["x", "y"], &["2+cos(x)", "exp(y)"]);
        let geo = g.at(&[0.2, 0.5], 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::zero(2, 3);
                for k in 0..2 {
                    acc.add_product(geo.metric(i, k), geo.metric_inv(k, j));
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - target).abs() < 1e-14);
                assert!(acc.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn singular_metric_rejected() {
        let g = metric(&["x", "y"], &["1", "x"]);
        assert!(matches!(g.at(&[0.0, 0.0], 2), Err(GeometryError::SingularMetric { .. })));
    }

    #[test]
    fn signature_checked() {
        let g = metric(&["t", "x"], &["-1", "1"]).with_signature(vec![1, 1]).unwrap();
        assert!(matches!(g.at(&[0.0, 0.0], 1), Err(GeometryError::Signature { .. })));
        let g = metric(&["t", "x"], &["-1", "1"]).with_signature(vec![-1, 1]).unwrap();
        assert!(g.at(&[0.0, 0.0], 1).is_ok());
    }
}

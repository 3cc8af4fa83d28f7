//! Metric variations along one block, their first-order effect on the
//! extrinsic and contorsion invariants, and the Euler–Lagrange machinery.
//!
//! All analytic formulas are stated for a side `S` containing the support of
//! `B`; the varied block itself uses `S = D_j`, every other block `i` uses
//! `S = D_i^⊥` (the invariants `Q` and `Q̄` are symmetric under `D ↔ D^⊥`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connections::ContorsionAt;
use crate::error::{GeometryError, Result};
use crate::expr::Expr;
use crate::geometry::{invert_jet_matrix, MetricField, PointGeometry};
use crate::jet::Jet;
use crate::models::ModelSpec;
use crate::multiproduct::{values, Dist, MultiPoint, SplittingSpec};

/// First step of the central-difference oracle; the second is half of it.
pub const FD_STEP: f64 = 1e-3;

/// `g_t = g + tB` with `B = Σ φ_ab θ^a θ^b`, `θ^a` dual to the spanning
/// fields of one block. `B` vanishes whenever an argument lies in another block.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationFamily {
    block: usize,
    dim: usize,
    /// Row-major `n_j × n_j`, symmetric.
    phi: Vec<Expr>,
}

impl VariationFamily {
    pub fn new(split: &SplittingSpec, block: usize, phi: Vec<Expr>) -> Result<VariationFamily> {
        let dims = split.block_dims();
        let Some(&d) = dims.get(block) else {
            return Err(GeometryError::Invalid(format!("no block {block}")));
        };
        if phi.len() != d * d {
            return Err(GeometryError::Invalid("variation needs n_j² coefficients".into()));
        }
        for a in 0..d {
            for b in 0..a {
                if phi[a * d + b] != phi[b * d + a] {
                    return Err(GeometryError::Invalid("variation coefficients not symmetric".into()));
                }
            }
        }
        Ok(VariationFamily {
            block,
            dim: d,
            phi,
        })
    }

    /// Random smooth periodic coefficients `c₀ + c₁ sin(x_r + c₂)` per entry.
    pub fn sample(split: &SplittingSpec, block: usize, seed: u64) -> Result<VariationFamily> {
        let n = split.dim();
        let d = split.block_dims()[block];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = vec![Expr::zero(); d * d];
        for a in 0..d {
            for b in a..d {
                let c0: f64 = rng.gen_range(-1.0..1.0);
                let c1: f64 = rng.gen_range(-1.0..1.0);
                let c2: f64 = rng.gen_range(0.0..6.0);
                let r = rng.gen_range(0..n);
                let e = Expr::constant(c0)
                    + Expr::constant(c1) * (Expr::coord(r) + Expr::constant(c2)).sin();
                phi[a * d + b] = e.clone();
                phi[b * d + a] = e;
            }
        }
        VariationFamily::new(split, block, phi)
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Chart components `B_kl`.
    pub fn chart_jets(&self, split: &SplittingSpec, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = split.dim();
        let fields: Vec<Vec<Jet>> = split
            .blocks()
            .iter()
            .flatten()
            .map(|v| v.jets(p, order))
            .collect::<Result<_>>()?;
        let mut m = vec![Jet::zero(n, order); n * n];
        for (a, f) in fields.iter().enumerate() {
            for k in 0..n {
                m[k * n + a] = f[k].clone();
            }
        }
        let theta = invert_jet_matrix(&m, n).ok_or_else(|| {
            GeometryError::InvalidSplitting("spanning fields are linearly dependent".into())
        })?;
        let start = split.ranges()[self.block].start;
        let d = self.dim;
        let phi: Vec<Jet> = self
            .phi
            .iter()
            .map(|e| e.eval_jet(p, order))
            .collect::<std::result::Result<_, _>>()?;
        let mut out = vec![Jet::zero(n, order); n * n];
        for a in 0..d {
            for b in 0..d {
                if crate::geometry::is_zero(&phi[a * d + b]) {
                    continue;
                }
                for k in 0..n {
                    let w = &phi[a * d + b] * &theta[(start + a) * n + k];
                    for l in 0..n {
                        out[k * n + l].add_product(&w, &theta[(start + b) * n + l]);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `B_j = f·g_j`: a conformal change of the block metric.
#[derive(Clone, Debug)]
pub struct ConformalFamily {
    block: usize,
    factor: Expr,
    metric: MetricField,
    split: SplittingSpec,
}

impl ConformalFamily {
    pub fn new(g: &MetricField, split: &SplittingSpec, block: usize, factor: Expr) -> Result<ConformalFamily> {
        if block >= split.k() {
            return Err(GeometryError::Invalid(format!("no block {block}")));
        }
        Ok(ConformalFamily {
            block,
            factor,
            metric: g.clone(),
            split: split.clone(),
        })
    }

    /// Chart components of `f·g(P_j·, P_j·)` at `p`.
    pub fn chart_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let mp = MultiPoint::at(&self.metric, &self.split, p, order)?;
        let n = mp.dim();
        let f = self.factor.eval_jet(p, order)?;
        let mut out = vec![Jet::zero(n, order); n * n];
        for a in mp.frame.ranges[self.block].clone() {
            let low = mp.geo.lower(&mp.frame.vectors[a]);
            let fe = f.scale(mp.eps(a));
            for k in 0..n {
                let w = &fe * &low[k];
                for l in 0..n {
                    out[k * n + l].add_product(&w, &low[l]);
                }
            }
        }
        Ok(out)
    }

    pub fn block(&self) -> usize {
        self.block
    }
}

/// Some source of block-supported chart jets for `B`.
pub trait BlockVariation {
    fn block(&self) -> usize;
    fn b_chart(&self, model: &ModelSpec, p: &[f64], order: usize) -> Result<Vec<Jet>>;
}

impl BlockVariation for VariationFamily {
    fn block(&self) -> usize {
        self.block
    }
    fn b_chart(&self, model: &ModelSpec, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.chart_jets(&model.splitting, p, order)
    }
}

impl BlockVariation for ConformalFamily {
    fn block(&self) -> usize {
        self.block
    }
    fn b_chart(&self, _model: &ModelSpec, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.chart_jets(p, order)
    }
}

/// Multi-product data of `g + tB` at `p`.
pub fn varied_point(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
    order: usize,
    t: f64,
) -> Result<MultiPoint> {
    let mut g = model.metric.jets(p, order)?;
    if t != 0.0 {
        let b = fam.b_chart(model, p, order)?;
        for (x, y) in g.iter_mut().zip(&b) {
            *x += &y.scale(t);
        }
    }
    MultiPoint::from_geometry(PointGeometry::new(p, g)?, &model.splitting)
}

/// Richardson-extrapolated central difference of `f` at 0 with steps `h`, `h/2`.
pub fn fd_derivative<F>(f: F, h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let d = |s: f64| -> Result<Vec<f64>> {
        let (p, m) = (f(s)?, f(-s)?);
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * s)).collect())
    };
    let (d1, d2) = (d(h)?, d(0.5 * h)?);
    Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
}

/// Name/value pair of one derivative formula.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

fn frame_b(mp: &MultiPoint, b_chart: &[Jet]) -> Vec<Jet> {
    let n = mp.dim();
    let fv = &mp.frame.vectors;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for c in 0..n {
            let mut acc = Jet::zero(n, b_chart[0].order().min(fv[0][0].order()));
            for k in 0..n {
                for l in 0..n {
                    let w = &fv[a][k] * &fv[c][l];
                    acc.add_product(&w, &b_chart[k * n + l]);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Frame data of a variation at the base metric.
pub struct VariationBase {
    pub mp: MultiPoint,
    pub block: usize,
    /// `B(E_a, E_b)` as values and jets.
    pub b: Vec<f64>,
    pub b_jets: Vec<Jet>,
}

impl VariationBase {
    pub fn new(model: &ModelSpec, fam: &dyn BlockVariation, p: &[f64]) -> Result<VariationBase> {
        let mp = model.at(p, 2)?;
        let bc = fam.b_chart(model, p, 2)?;
        let b_jets = frame_b(&mp, &bc);
        Ok(VariationBase {
            block: fam.block(),
            b: values(&b_jets),
            b_jets,
            mp,
        })
    }

    /// `⟨C, B⟩ = Σ ε_a ε_b C_ab B_ab`.
    pub fn pair(&self, c: &[f64]) -> f64 {
        pair02(&self.mp, c, &self.b)
    }

    /// The side used for block `i`: `D_j` itself, or `D_i^⊥` for `i ≠ j`.
    pub fn side_mask(&self, i: usize) -> Vec<bool> {
        side_mask(&self.mp, self.block, i)
    }
}

fn side_mask(mp: &MultiPoint, j: usize, i: usize) -> Vec<bool> {
    if i == j {
        mp.mask(&Dist::Block(j))
    } else {
        mp.mask(&Dist::Perp(i))
    }
}

pub(crate) fn pair02(mp: &MultiPoint, c: &[f64], b: &[f64]) -> f64 {
    let n = mp.dim();
    let mut s = 0.0;
    for x in 0..n {
        for y in 0..n {
            s += mp.eps(x) * mp.eps(y) * c[x * n + y] * b[x * n + y];
        }
    }
    s
}

fn complement(mask: &[bool]) -> Vec<bool> {
    mask.iter().map(|x| !x).collect()
}

fn restrict(mut c: Vec<f64>, mask: &[bool]) -> Vec<f64> {
    let n = mask.len();
    for x in 0..n {
        for y in 0..n {
            if !(mask[x] && mask[y]) {
                c[x * n + y] = 0.0;
            }
        }
    }
    c
}

fn symmetrize(c: &mut [f64], n: usize) {
    for x in 0..n {
        for y in 0..x {
            let m = 0.5 * (c[x * n + y] + c[y * n + x]);
            c[x * n + y] = m;
            c[y * n + x] = m;
        }
    }
}

/// `|h_{S^c}|², |h_S|², |H_{S^c}|², |H_S|², |T_{S^c}|², |T_S|²`.
pub fn side_q_scalars(mp: &MultiPoint, mask: &[bool]) -> [f64; 6] {
    let s = mp.side_tensors(mask);
    let o = mp.side_tensors(&complement(mask));
    let (hs, ts, ms) = (values(&s.h), values(&s.t), values(&s.mean));
    let (ho, to, mo) = (values(&o.h), values(&o.t), values(&o.mean));
    [
        mp.dot12(&ho, &ho),
        mp.dot12(&hs, &hs),
        mp.dot(&mo, &mo),
        mp.dot(&ms, &ms),
        mp.dot12(&to, &to),
        mp.dot12(&ts, &ts),
    ]
}

/// One analytic derivative `⟨C, B⟩ − Div X`.
#[derive(Clone, Debug)]
pub struct DerivativeTerm {
    pub tensor: Vec<f64>,
    /// Covariant frame jets of `X`, when a divergence is present.
    pub field: Option<Vec<Jet>>,
}

impl DerivativeTerm {
    pub fn value(&self, mp: &MultiPoint, b: &[f64]) -> f64 {
        let div = match &self.field {
            Some(f) => mp.div_frame(f).value(),
            None => 0.0,
        };
        pair02(mp, &self.tensor, b) - div
    }
}

/// Derivatives of [`side_q_scalars`] for `B` supported in `S`, same order.
pub fn side_q_derivatives(mp: &MultiPoint, b_jets: &[Jet], mask: &[bool]) -> [DerivativeTerm; 6] {
    let n = mp.dim();
    let comp = complement(mask);
    let s = mp.side_tensors(mask);
    let o = mp.side_tensors(&comp);
    let (hs, ts) = (values(&s.h), values(&s.t));
    let (ho, to, mo) = (values(&o.h), values(&o.t), values(&o.mean));
    let e = &mp.frame.eps;

    let ups_h = mp.upsilon(&ho, &ho).iter().map(|x| -0.5 * x).collect();
    let ups_t = mp.upsilon(&to, &to).iter().map(|x| 0.5 * x).collect();

    let div_h = mp.div_12_frame(&s.h);
    let k = mp.commutator_sum(mask, &ts, &hs);
    let c2: Vec<f64> = div_h.iter().zip(&k).map(|(a, b)| a + b).collect();
    let order = b_jets[0].order().min(s.h[0].order());
    let mut hb = vec![Jet::zero(n, order); n];
    for a in (0..n).filter(|&a| mask[a]) {
        for b in (0..n).filter(|&b| mask[b]) {
            let w = b_jets[a * n + b].scale(e[a] * e[b]);
            for c in (0..n).filter(|&c| !mask[c]) {
                hb[c].add_product(&w, &s.h[(a * n + b) * n + c]);
            }
        }
    }

    let mut c3 = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            c3[a * n + b] = -mo[a] * mo[b];
        }
    }

    let div_mean = mp.div_frame(&s.mean).value();
    let mut c4 = vec![0.0; n * n];
    for a in (0..n).filter(|&a| mask[a]) {
        c4[a * n + a] = div_mean * e[a];
    }
    let mut tr_b = Jet::zero(n, b_jets[0].order());
    for a in (0..n).filter(|&a| mask[a]) {
        tr_b += &b_jets[a * n + a].scale(e[a]);
    }
    let mb: Vec<Jet> = s.mean.iter().map(|m| m * &tr_b).collect();

    let twist: Vec<f64> = mp.operator_square_sum(mask, &ts, &ts).iter().map(|x| 2.0 * x).collect();

    [
        DerivativeTerm { tensor: restrict(ups_h, mask), field: None },
        DerivativeTerm { tensor: restrict(c2, mask), field: Some(hb) },
        DerivativeTerm { tensor: restrict(c3, mask), field: None },
        DerivativeTerm { tensor: c4, field: Some(mb) },
        DerivativeTerm { tensor: restrict(ups_t, mask), field: None },
        DerivativeTerm { tensor: restrict(twist, mask), field: None },
    ]
}

/// Signs of the six terms of [`side_q_scalars`] in `Q(S)`.
const Q_SIGNS: [f64; 6] = [-1.0, -1.0, 1.0, 1.0, 1.0, 1.0];

fn q_labels(i: usize, j: usize) -> [String; 6] {
    let b = i + 1;
    if i == j {
        [
            format!("|h{b}perp|^2"),
            format!("|h{b}|^2"),
            format!("|H{b}perp|^2"),
            format!("|H{b}|^2"),
            format!("|T{b}perp|^2"),
            format!("|T{b}|^2"),
        ]
    } else {
        [
            format!("|h{b}|^2"),
            format!("|h{b}perp|^2"),
            format!("|H{b}|^2"),
            format!("|H{b}perp|^2"),
            format!("|T{b}|^2"),
            format!("|T{b}perp|^2"),
        ]
    }
}

/// Analytic `∂_t` of the six `Q`-terms of every block.
pub fn analytic_variation_q(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<NamedValue>> {
    let base = VariationBase::new(model, fam, p)?;
    let mut out = Vec::new();
    for i in 0..base.mp.k() {
        let mask = base.side_mask(i);
        let terms = side_q_derivatives(&base.mp, &base.b_jets, &mask);
        for (name, t) in q_labels(i, base.block).into_iter().zip(terms.iter()) {
            out.push(NamedValue { name, value: t.value(&base.mp, &base.b) });
        }
    }
    Ok(out)
}

/// Finite-difference `∂_t` of the same quantities, recomputed from scratch on `g_t`.
pub fn oracle_variation_q(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<NamedValue>> {
    let j = fam.block();
    let k = model.splitting.k();
    let d = fd_derivative(
        |t| {
            let mp = varied_point(model, fam, p, 1, t)?;
            Ok((0..k)
                .flat_map(|i| side_q_scalars(&mp, &side_mask(&mp, j, i)))
                .collect())
        },
        FD_STEP,
    )?;
    let names = (0..k).flat_map(|i| q_labels(i, j));
    Ok(names.zip(d).map(|(name, value)| NamedValue { name, value }).collect())
}

/// Θ paired with the four operators of a side (see [`ContorsionAt::bar_q_side`]):
/// `⟨Θ, A_S⟩, ⟨Θ, T♯_S⟩, ⟨Θ, T♯_{S^c}⟩, ⟨Θ, A_{S^c}⟩`.
pub fn theta_pairings(ca: &ContorsionAt, mask: &[bool]) -> [f64; 4] {
    let mp = ca.mp;
    let n = mp.dim();
    let v = ca.frame_values();
    let star = ca.conjugates().star;
    let s = mp.side_tensors(mask);
    let o = mp.side_tensors(&complement(mask));
    let (hs, ts, ho, to) = (values(&s.h), values(&s.t), values(&o.h), values(&o.t));
    let e = &mp.frame.eps;
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    let mut out = [0.0; 4];
    for a in (0..n).filter(|&a| mask[a]) {
        for b in (0..n).filter(|&b| !mask[b]) {
            for d in 0..n {
                let th = v[idx(b, a, d)] - star[idx(b, a, d)] + v[idx(a, b, d)] - star[idx(a, b, d)];
                let w = e[a] * e[b] * e[d] * th;
                if mask[d] {
                    out[0] += w * hs[idx(a, d, b)];
                    out[1] += w * ts[idx(a, d, b)];
                } else {
                    out[2] += w * to[idx(b, d, a)];
                    out[3] += w * ho[idx(b, d, a)];
                }
            }
        }
    }
    out
}

/// `⟨𝕀*,𝕀^∧⟩|V, ⟨tr_{S^c}𝕀, tr_S𝕀*⟩, ⟨tr_S𝕀, tr_{S^c}𝕀*⟩, ⟨Θ,A_S⟩, ⟨Θ,T♯_S⟩,
/// ⟨Θ,T♯_{S^c}⟩, ⟨Θ,A_{S^c}⟩, ⟨tr_S(𝕀*−𝕀), H_{S^c}−H_S⟩, ⟨tr_{S^c}(𝕀*−𝕀), H_{S^c}−H_S⟩`.
pub fn side_barq_scalars(ca: &ContorsionAt, mask: &[bool]) -> [f64; 9] {
    let mp = ca.mp;
    let n = mp.dim();
    let comp = complement(mask);
    let u = values(&ca.trace(mask, false));
    let us = values(&ca.trace(mask, true));
    let w = values(&ca.trace(&comp, false));
    let ws = values(&ca.trace(&comp, true));
    let hm = values(&mp.side_tensors(mask).mean);
    let hp = values(&mp.side_tensors(&comp).mean);
    let hd: Vec<f64> = (0..n).map(|c| hp[c] - hm[c]).collect();
    let du: Vec<f64> = (0..n).map(|c| us[c] - u[c]).collect();
    let dw: Vec<f64> = (0..n).map(|c| ws[c] - w[c]).collect();
    let th = theta_pairings(ca, mask);
    [
        ca.star_wedge_restricted(mask),
        mp.dot(&w, &us),
        mp.dot(&u, &ws),
        th[0],
        th[1],
        th[2],
        th[3],
        mp.dot(&du, &hd),
        mp.dot(&dw, &hd),
    ]
}

/// Derivatives of [`side_barq_scalars`] for a statistical `𝕀` held fixed as a
/// (1,2) tensor, `B` supported in `S`; each entry is the symmetric tensor `C`
/// with `∂_t = ⟨C, B⟩`.
pub fn side_barq_derivatives(ca: &ContorsionAt, mask: &[bool]) -> [Vec<f64>; 9] {
    let mp = ca.mp;
    let n = mp.dim();
    let comp = complement(mask);
    let iv = ca.frame_values();
    let u = values(&ca.trace(mask, false));
    let w = values(&ca.trace(&comp, false));
    let s = mp.side_tensors(mask);
    let o = mp.side_tensors(&comp);
    let (hs, ts, ho) = (values(&s.h), values(&s.t), values(&o.h));
    let hm = values(&s.mean);
    let hp = values(&o.mean);
    let e = &mp.frame.eps;
    let i3 = |a: usize, b: usize, c: usize| iv[(a * n + b) * n + c];
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    let mut c = [
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
        vec![0.0; n * n],
    ];
    for a in (0..n).filter(|&a| mask[a]) {
        for f in (0..n).filter(|&f| mask[f]) {
            let af = a * n + f;
            for b in (0..n).filter(|&b| !mask[b]) {
                for d in 0..n {
                    c[0][af] -= e[b] * e[d] * i3(a, b, d) * i3(f, b, d);
                }
            }
            for d in 0..n {
                c[2][af] -= e[d] * i3(a, f, d) * w[d];
            }
            for b in (0..n).filter(|&b| !mask[b]) {
                for d in (0..n).filter(|&d| mask[d]) {
                    let x = e[b] * e[d] * i3(f, b, d);
                    c[3][af] += x * hs[idx(a, d, b)];
                    c[4][af] -= 3.0 * x * ts[idx(a, d, b)];
                }
                for d in (0..n).filter(|&d| !mask[d]) {
                    c[6][af] -= e[b] * e[d] * ho[idx(b, d, a)] * i3(f, b, d);
                }
            }
            for d in 0..n {
                c[7][af] += e[d] * i3(f, a, d) * (hp[d] - hm[d]);
            }
            c[7][af] -= u[a] * hp[f];
            c[8][af] -= w[f] * hp[a];
        }
    }
    for t in c.iter_mut() {
        symmetrize(t, n);
    }
    c
}

/// `∂_t(2Q̄_S)` as a tensor, from [`side_barq_derivatives`].
pub fn two_barq_derivative(c: &[Vec<f64>; 9]) -> Vec<f64> {
    let w = [-1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    let n2 = c[0].len();
    (0..n2).map(|x| (0..9).map(|k| w[k] * c[k][x]).sum()).collect()
}

fn barq_labels(i: usize, j: usize) -> [String; 9] {
    let b = i + 1;
    let (s, o) = if i == j {
        (format!("D{b}"), format!("D{b}perp"))
    } else {
        (format!("D{b}perp"), format!("D{b}"))
    };
    [
        format!("<I*,I^>|V(D{b})"),
        format!("<tr_{o} I, tr_{s} I*>"),
        format!("<tr_{s} I, tr_{o} I*>"),
        format!("<Theta, A({s})>"),
        format!("<Theta, T#({s})>"),
        format!("<Theta, T#({o})>"),
        format!("<Theta, A({o})>"),
        format!("<tr_{s}(I*-I), H({o})-H({s})>"),
        format!("<tr_{o}(I*-I), H({o})-H({s})>"),
    ]
}

fn require_statistical(ca: &ContorsionAt) -> Result<()> {
    let d = ca.statistical_defect();
    if d > 1e-10 {
        return Err(GeometryError::Invalid(format!(
            "contorsion is not statistical at this point (defect {d:e})"
        )));
    }
    Ok(())
}

/// Analytic `∂_t` of the nine contorsion terms of every block.
pub fn analytic_variation_barq(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<NamedValue>> {
    let base = VariationBase::new(model, fam, p)?;
    let ca = ContorsionAt::for_contorsion(&base.mp, &model.contorsion)?;
    require_statistical(&ca)?;
    let mut out = Vec::new();
    for i in 0..base.mp.k() {
        let mask = base.side_mask(i);
        let c = side_barq_derivatives(&ca, &mask);
        for (name, t) in barq_labels(i, base.block).into_iter().zip(c.iter()) {
            out.push(NamedValue { name, value: base.pair(t) });
        }
    }
    Ok(out)
}

/// Finite-difference counterpart of [`analytic_variation_barq`], with `𝕀` frozen
/// at its base-point chart components.
pub fn oracle_variation_barq(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<NamedValue>> {
    let j = fam.block();
    let k = model.splitting.k();
    let frozen = model.contorsion.chart_jets(&model.metric.at(p, 1)?)?;
    let d = fd_derivative(
        |t| {
            let mp = varied_point(model, fam, p, 1, t)?;
            let ca = ContorsionAt::new(&mp, frozen.clone());
            Ok((0..k)
                .flat_map(|i| side_barq_scalars(&ca, &side_mask(&mp, j, i)))
                .collect())
        },
        FD_STEP,
    )?;
    let names = (0..k).flat_map(|i| barq_labels(i, j));
    Ok(names.zip(d).map(|(name, value)| NamedValue { name, value }).collect())
}

/// `𝒬(D_j)`, `𝒬̄(D_j)` and `X_j` with
/// `∂_t Σ_i Q(D_i) = ⟨𝒬, B⟩ − Div X_j` and `∂_t Σ_i Q̄(D_i) = ⟨𝒬̄, B⟩`.
#[derive(Clone, Debug)]
pub struct AggregateVariation {
    pub q_tensor: Vec<f64>,
    pub barq_tensor: Vec<f64>,
    /// Covariant frame jets of `X_j`.
    pub x_field: Vec<Jet>,
    /// `⟨𝒬, B⟩ − Div X_j`.
    pub dq: f64,
    /// `⟨𝒬̄, B⟩`.
    pub dbarq: f64,
}

/// The `B`-independent part of `𝒬(D_j)`.
pub fn q_tensor(mp: &MultiPoint, j: usize) -> Vec<f64> {
    let n = mp.dim();
    let zero = vec![Jet::zero(n, 1); n * n];
    let mut q = vec![0.0; n * n];
    for i in 0..mp.k() {
        let mask = side_mask(mp, j, i);
        for (t, sgn) in side_q_derivatives(mp, &zero, &mask).iter().zip(Q_SIGNS) {
            for (x, y) in q.iter_mut().zip(&t.tensor) {
                *x += sgn * y;
            }
        }
    }
    restrict(q, &mp.mask(&Dist::Block(j)))
}

/// The `B`-independent tensor `𝒬̄(D_j)` for a statistical contorsion.
pub fn barq_tensor(ca: &ContorsionAt, j: usize) -> Vec<f64> {
    let mp = ca.mp;
    let n = mp.dim();
    let mut q = vec![0.0; n * n];
    for i in 0..mp.k() {
        let c = side_barq_derivatives(ca, &side_mask(mp, j, i));
        for (x, y) in q.iter_mut().zip(two_barq_derivative(&c)) {
            *x += 0.5 * y;
        }
    }
    restrict(q, &mp.mask(&Dist::Block(j)))
}

pub fn aggregate_variation(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<AggregateVariation> {
    let base = VariationBase::new(model, fam, p)?;
    let mp = &base.mp;
    let n = mp.dim();
    let ca = ContorsionAt::for_contorsion(mp, &model.contorsion)?;
    require_statistical(&ca)?;
    let q = q_tensor(mp, base.block);
    let barq = barq_tensor(&ca, base.block);
    let mut x = vec![Jet::zero(n, 1); n];
    for i in 0..mp.k() {
        let terms = side_q_derivatives(mp, &base.b_jets, &base.side_mask(i));
        for (t, sgn) in terms.iter().zip(Q_SIGNS) {
            if let Some(f) = &t.field {
                for c in 0..n {
                    x[c] += &f[c].scale(sgn);
                }
            }
        }
    }
    let dq = base.pair(&q) - mp.div_frame(&x).value();
    let dbarq = base.pair(&barq);
    Ok(AggregateVariation {
        q_tensor: q,
        barq_tensor: barq,
        x_field: x,
        dq,
        dbarq,
    })
}

/// Finite-difference `(∂_t Σ Q(D_i), ∂_t Σ Q̄(D_i))` with `𝕀` frozen.
pub fn oracle_aggregate(model: &ModelSpec, fam: &dyn BlockVariation, p: &[f64]) -> Result<(f64, f64)> {
    let k = model.splitting.k();
    let frozen = model.contorsion.chart_jets(&model.metric.at(p, 1)?)?;
    let d = fd_derivative(
        |t| {
            let mp = varied_point(model, fam, p, 1, t)?;
            let ca = ContorsionAt::new(&mp, frozen.clone());
            let q: f64 = (0..k).map(|i| mp.q_function(i)).sum();
            let bq: f64 = (0..k).map(|i| ca.bar_q(i)).sum();
            Ok(vec![q, bq])
        },
        FD_STEP,
    )?;
    Ok((d[0], d[1]))
}

/// `∂_t dvol_g = ½ tr_g B · dvol_g`, and the correction `½ X(tr_g B)` in
/// `∂_t Div X = Div ∂_t X + ½ X(tr_g B)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeVariation {
    pub dvol_factor: f64,
    pub div_correction: f64,
}

/// `x` gives chart components of a `t`-independent vector field.
pub fn volume_variation_utils(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
    x: &[Jet],
) -> Result<VolumeVariation> {
    let geo = model.metric.at(p, 2)?;
    let b = fam.b_chart(model, p, 2)?;
    let n = geo.dim();
    let mut tr = Jet::zero(n, 2);
    for k in 0..n {
        for l in 0..n {
            tr.add_product(geo.metric_inv(k, l), &b[k * n + l]);
        }
    }
    let mut xd = 0.0;
    for k in 0..n {
        xd += x[k].value() * tr.derivative(k).value();
    }
    Ok(VolumeVariation {
        dvol_factor: 0.5 * tr.value(),
        div_correction: 0.5 * xd,
    })
}

/// Finite-difference counterpart: `(∂_t log √|det g_t|, ∂_t Div_{g_t} X)`.
pub fn oracle_volume_variation(
    model: &ModelSpec,
    fam: &dyn BlockVariation,
    p: &[f64],
    x: &[Jet],
) -> Result<VolumeVariation> {
    let d = fd_derivative(
        |t| {
            let mp = varied_point(model, fam, p, 2, t)?;
            Ok(vec![mp.geo.volume_density().ln(), mp.geo.div(x).value()])
        },
        FD_STEP,
    )?;
    Ok(VolumeVariation {
        dvol_factor: d[0],
        div_correction: d[1],
    })
}

impl VariationFamily {
    /// Checks that `g ± t_max B` keeps the signature of `g` at `p`.
    pub fn validate(&self, model: &ModelSpec, p: &[f64], t_max: f64) -> Result<()> {
        let base = model.metric.at(p, 0)?.inertia();
        for t in [t_max, -t_max] {
            let mp = varied_point(model, self, p, 1, t)?;
            let found = mp.geo.inertia();
            if found != base {
                return Err(GeometryError::Signature {
                    point: p.to_vec(),
                    expected: base,
                    found,
                });
            }
        }
        Ok(())
    }
}

fn outer(v: &[f64], w: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = v[a] * w[b];
        }
    }
    out
}

fn add_scaled(acc: &mut [f64], x: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Frame components of `g` restricted to `D_j × D_j`.
fn block_metric(mp: &MultiPoint, j: usize) -> Vec<f64> {
    let n = mp.dim();
    let mut g = vec![0.0; n * n];
    for a in mp.frame.ranges[j].clone() {
        g[a * n + a] = mp.eps(a);
    }
    g
}

/// `tr_{g_j} C = Σ_{a∈D_j} ε_a C_aa`.
fn block_trace(mp: &MultiPoint, j: usize, c: &[f64]) -> f64 {
    let n = mp.dim();
    mp.frame.ranges[j].clone().map(|a| mp.eps(a) * c[a * n + a]).sum()
}

/// `Σ_{b∉S} ε_b ⟨R_{E_b,X}E_b, Y⟩` on `S × S`.
pub fn side_ricci(mp: &MultiPoint, mask: &[bool]) -> Vec<f64> {
    let n = mp.dim();
    let rf = mp.frame_curvature();
    let mut out = vec![0.0; n * n];
    for c in (0..n).filter(|&c| mask[c]) {
        for d in (0..n).filter(|&d| mask[d]) {
            out[c * n + d] = (0..n)
                .filter(|&b| !mask[b])
                .map(|b| mp.eps(b) * rf[((b * n + c) * n + b) * n + d])
                .sum();
        }
    }
    out
}

/// How `Div h_S` enters [`expanded_side`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivRoute {
    /// Direct divergence of the second fundamental form.
    Direct,
    /// Through the partial Ricci identity
    /// `Div h_S = r_S − ⟨h_S, H_S⟩ + 𝒜_S + 𝒯_S + Ψ_{S^c} − Def_S H_{S^c}`.
    Ricci,
}

/// `Div h_S + 𝒦_S + H_{S^c}⊗H_{S^c} − ½Υ_{h_{S^c}} − ½Υ_{T_{S^c}} − 2𝒯_S` on `S × S`;
/// `short` drops the terms that vanish when every block and pair is integrable.
pub fn expanded_side(mp: &MultiPoint, mask: &[bool], route: DivRoute, short: bool) -> Vec<f64> {
    let n = mp.dim();
    let comp = complement(mask);
    let s = mp.side_tensors(mask);
    let o = mp.side_tensors(&comp);
    let (hs, ts, ms) = (values(&s.h), values(&s.t), values(&s.mean));
    let (ho, to, mo) = (values(&o.h), values(&o.t), values(&o.mean));
    let mut out = match route {
        DivRoute::Direct => mp.div_12_frame(&s.h),
        DivRoute::Ricci => {
            let mut r = side_ricci(mp, mask);
            for a in (0..n).filter(|&a| mask[a]) {
                for b in (0..n).filter(|&b| mask[b]) {
                    let hh: f64 = (0..n).map(|c| mp.eps(c) * hs[(a * n + b) * n + c] * ms[c]).sum();
                    r[a * n + b] -= hh;
                }
            }
            add_scaled(&mut r, &mp.operator_square_sum(mask, &hs, &hs), 1.0);
            add_scaled(&mut r, &mp.operator_square_sum(mask, &ts, &ts), 1.0);
            add_scaled(&mut r, &mp.psi(&comp, &ho, &to), 1.0);
            add_scaled(&mut r, &mp.deformation(&mp.to_chart(&o.mean), mask), -1.0);
            r
        }
    };
    add_scaled(&mut out, &mp.commutator_sum(mask, &ts, &hs), 1.0);
    add_scaled(&mut out, &outer(&mo, &mo), 1.0);
    add_scaled(&mut out, &mp.upsilon(&ho, &ho), -0.5);
    if !short {
        add_scaled(&mut out, &mp.upsilon(&to, &to), -0.5);
        add_scaled(&mut out, &mp.operator_square_sum(mask, &ts, &ts), -2.0);
    }
    let mut out = restrict(out, mask);
    symmetrize(&mut out, n);
    out
}

/// Residual of the volume-preserving Euler–Lagrange equation on one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockResidual {
    pub block: usize,
    /// Frame components on `D_j × D_j`, including `λ_j g_j`.
    pub residual: Vec<f64>,
    pub lambda: f64,
    /// `tr_{g_j}` of the residual without `λ_j`.
    pub trace_without_lambda: f64,
    pub max_abs: f64,
}

impl BlockResidual {
    fn build(mp: &MultiPoint, j: usize, mut r: Vec<f64>, lambda: Option<f64>) -> BlockResidual {
        let n = mp.dim();
        symmetrize(&mut r, n);
        let tr = block_trace(mp, j, &r);
        let nj = mp.frame.ranges[j].len() as f64;
        let lambda = lambda.unwrap_or(-tr / nj);
        add_scaled(&mut r, &block_metric(mp, j), lambda);
        let max_abs = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        BlockResidual {
            block: j,
            residual: r,
            lambda,
            trace_without_lambda: tr,
            max_abs,
        }
    }
}

/// `½ Σ_i Div(H_i + H_i^⊥)` at the point.
pub fn half_mean_divergence(mp: &MultiPoint) -> f64 {
    let ex = mp.extrinsic();
    let n = mp.dim();
    let mut v = vec![Jet::zero(n, ex.blocks[0].mean[0].order()); n];
    for i in 0..mp.k() {
        for c in 0..n {
            v[c] += &ex.blocks[i].mean[c];
            v[c] += &ex.perps[i].mean[c];
        }
    }
    0.5 * mp.div_frame(&v).value()
}

/// `Div(H_j + Σ_{i≠j} H_i^⊥)`.
fn divergence_y(mp: &MultiPoint, j: usize) -> f64 {
    let ex = mp.extrinsic();
    let n = mp.dim();
    let mut v = ex.blocks[j].mean.clone();
    for i in (0..mp.k()).filter(|&i| i != j) {
        for c in 0..n {
            v[c] += &ex.perps[i].mean[c];
        }
    }
    mp.div_frame(&v).value()
}

/// Which form of the block Euler–Lagrange equation to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElForm {
    /// `𝒬 + 𝒬̄ + (S̄ − ½ Div Σ(H_i + H_i^⊥) + λ) g_j`.
    Compact,
    /// `𝒬 + (½ Σ Q_i + λ) g_j`; the contorsion is ignored.
    Unconstrained,
    /// Expanded extrinsic form with the direct `Div h` terms (`𝕀 = 0` only).
    Expanded,
    /// Expanded form with `Div h` replaced through the partial Ricci identities.
    ExpandedRicci,
    /// Expanded form without twist terms, valid when all blocks and pairs are integrable.
    ExpandedShort,
}

/// Block `j` Euler–Lagrange residual at `p`; `λ_j` is fitted when not given.
/// Statistical and zero contorsions are supported.
pub fn el_residual(
    model: &ModelSpec,
    p: &[f64],
    j: usize,
    form: ElForm,
    lambda: Option<f64>,
) -> Result<BlockResidual> {
    let mp = model.at(p, 3)?;
    el_residual_at(&mp, model, j, form, lambda)
}

pub fn el_residual_at(
    mp: &MultiPoint,
    model: &ModelSpec,
    j: usize,
    form: ElForm,
    lambda: Option<f64>,
) -> Result<BlockResidual> {
    if j >= mp.k() {
        return Err(GeometryError::Invalid(format!("no block {j}")));
    }
    let g = block_metric(mp, j);
    let r = match form {
        ElForm::Compact => {
            let ca = ContorsionAt::for_contorsion(mp, &model.contorsion)?;
            require_statistical(&ca)?;
            let mut r = q_tensor(mp, j);
            add_scaled(&mut r, &barq_tensor(&ca, j), 1.0);
            let s_bar = ca.bar_mixed_scalar().total;
            add_scaled(&mut r, &g, s_bar - half_mean_divergence(mp));
            r
        }
        ElForm::Unconstrained => {
            let mut r = q_tensor(mp, j);
            let sq: f64 = (0..mp.k()).map(|i| mp.q_function(i)).sum();
            add_scaled(&mut r, &g, 0.5 * sq);
            r
        }
        ElForm::Expanded | ElForm::ExpandedRicci | ElForm::ExpandedShort => {
            let (route, short) = match form {
                ElForm::ExpandedRicci => (DivRoute::Ricci, false),
                ElForm::ExpandedShort => (DivRoute::Direct, true),
                _ => (DivRoute::Direct, false),
            };
            let mut lhs = vec![0.0; mp.dim() * mp.dim()];
            for i in 0..mp.k() {
                add_scaled(&mut lhs, &expanded_side(mp, &side_mask(mp, j, i), route, short), 1.0);
            }
            let lhs = restrict(lhs, &mp.mask(&Dist::Block(j)));
            let rhs = mp.mixed_scalar().total - half_mean_divergence(mp) + divergence_y(mp, j);
            let mut r: Vec<f64> = lhs.iter().map(|x| -x).collect();
            add_scaled(&mut r, &g, rhs);
            r
        }
    };
    Ok(BlockResidual::build(mp, j, r, lambda))
}

/// Pointwise residuals over many points, with the spread of the fitted `λ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElReport {
    pub form: ElForm,
    pub blocks: Vec<ElBlockSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElBlockSummary {
    pub block: usize,
    pub lambda_mean: f64,
    /// `max |λ_j(x) − mean|`; criticality needs this to vanish.
    pub lambda_deviation: f64,
    /// Largest entry of the λ-fitted residual.
    pub max_residual: f64,
    pub max_trace: f64,
    pub points: Vec<BlockResidual>,
}

pub fn el_report(model: &ModelSpec, points: &[Vec<f64>], form: ElForm) -> Result<ElReport> {
    let k = model.splitting.k();
    let mut blocks = Vec::with_capacity(k);
    let mps: Vec<MultiPoint> = points.iter().map(|p| model.at(p, 3)).collect::<Result<_>>()?;
    for j in 0..k {
        let res: Vec<BlockResidual> = mps
            .iter()
            .map(|mp| el_residual_at(mp, model, j, form, None))
            .collect::<Result<_>>()?;
        let mean = res.iter().map(|r| r.lambda).sum::<f64>() / res.len().max(1) as f64;
        blocks.push(ElBlockSummary {
            block: j,
            lambda_mean: mean,
            lambda_deviation: res.iter().fold(0.0, |m, r| m.max((r.lambda - mean).abs())),
            max_residual: res.iter().fold(0.0, |m, r| m.max(r.max_abs)),
            max_trace: res.iter().fold(0.0, |m, r| m.max(r.trace_without_lambda.abs())),
            points: res,
        });
    }
    Ok(ElReport { form, blocks })
}

/// Coefficient matrix `A_ji = n_i − 2δ_ij` of the μ-system.
pub fn mu_matrix(n_vec: &[usize]) -> Vec<Vec<i64>> {
    let k = n_vec.len();
    (0..k)
        .map(|j| {
            (0..k)
                .map(|i| n_vec[i] as i64 - if i == j { 2 } else { 0 })
                .collect()
        })
        .collect()
}

/// Exact determinant by fraction-free elimination.
pub fn det_exact(m: &[Vec<i64>]) -> i64 {
    let k = m.len();
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for c in 0..k {
        if a[c][c] == 0 {
            match (c + 1..k).find(|&r| a[r][c] != 0) {
                Some(r) => {
                    a.swap(c, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for r in c + 1..k {
            for s in c + 1..k {
                a[r][s] = (a[r][s] * a[c][c] - a[r][c] * a[c][s]) / prev;
            }
            a[r][c] = 0;
        }
        prev = a[c][c];
    }
    (sign * a[k - 1][k - 1]) as i64
}

/// `μ_i = −(Σ_j (a_i − a_j) n_j − 2a_i) / (2n − 4)`; for `n = 2` all `μ_i = 0`.
pub fn mu_solve(n_vec: &[usize], a_vec: &[f64]) -> Result<Vec<f64>> {
    if n_vec.len() != a_vec.len() || n_vec.is_empty() || n_vec.contains(&0) {
        return Err(GeometryError::Invalid("μ-system needs matching positive block sizes".into()));
    }
    let n: usize = n_vec.iter().sum();
    match n {
        0 | 1 => Err(GeometryError::Invalid("μ-system needs n ≥ 2".into())),
        2 => Ok(vec![0.0; n_vec.len()]),
        _ => Ok(a_vec
            .iter()
            .map(|&ai| {
                let s: f64 = a_vec.iter().zip(n_vec).map(|(&aj, &nj)| (ai - aj) * nj as f64).sum();
                -(s - 2.0 * ai) / (2.0 * n as f64 - 4.0)
            })
            .collect()),
    }
}

/// Dense LU solve of the same system.
pub fn mu_solve_dense(n_vec: &[usize], a_vec: &[f64]) -> Result<Vec<f64>> {
    let k = n_vec.len();
    let m = mu_matrix(n_vec);
    let a = nalgebra::DMatrix::from_fn(k, k, |r, c| m[r][c] as f64);
    let b = nalgebra::DVector::from_column_slice(a_vec);
    a.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| GeometryError::Invalid("μ-system is singular".into()))
}

/// `a_j = tr_g Σ_i 𝒞_i − (2/n_j) tr_{g_j} 𝒞_j` for block tensors `𝒞_j`.
pub fn mu_rhs(mp: &MultiPoint, tensors: &[Vec<f64>]) -> Vec<f64> {
    let traces: Vec<f64> = tensors.iter().enumerate().map(|(j, c)| block_trace(mp, j, c)).collect();
    let total: f64 = traces.iter().sum();
    let dims = mp.block_dims();
    (0..tensors.len()).map(|j| total - 2.0 * traces[j] / dims[j] as f64).collect()
}

/// Mixed Ricci tensor assembled from the block Euler–Lagrange tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedRicci {
    /// Frame components, block diagonal.
    pub ricci: Vec<f64>,
    pub scalar: f64,
    pub mu: Vec<f64>,
}

/// `Ric̄_D|_{D_j} = −𝒞_j + μ_j g_j`, with `𝒞_j = 𝒬_j + 𝒬̄_j` and `μ` from the
/// μ-system built on the same tensors.
pub fn assemble_mixed_ricci(mp: &MultiPoint, tensors: &[Vec<f64>]) -> Result<MixedRicci> {
    let n = mp.dim();
    let a = mu_rhs(mp, tensors);
    let mu = mu_solve(&mp.block_dims(), &a)?;
    let mut ricci = vec![0.0; n * n];
    for (j, c) in tensors.iter().enumerate() {
        add_scaled(&mut ricci, &restrict(c.clone(), &mp.mask(&Dist::Block(j))), -1.0);
        add_scaled(&mut ricci, &block_metric(mp, j), mu[j]);
    }
    symmetrize(&mut ricci, n);
    let scalar = (0..n).map(|a| mp.eps(a) * ricci[a * n + a]).sum();
    Ok(MixedRicci { ricci, scalar, mu })
}

/// Mixed Ricci tensor for a zero or statistical contorsion.
pub fn mixed_ricci(model: &ModelSpec, p: &[f64]) -> Result<MixedRicci> {
    let mp = model.at(p, 3)?;
    let ca = ContorsionAt::for_contorsion(&mp, &model.contorsion)?;
    require_statistical(&ca)?;
    let tensors: Vec<Vec<f64>> = (0..mp.k())
        .map(|j| {
            let mut c = q_tensor(&mp, j);
            add_scaled(&mut c, &barq_tensor(&ca, j), 1.0);
            c
        })
        .collect();
    assemble_mixed_ricci(&mp, &tensors)
}

/// `Ric̄_D − ½ 𝒮̄_D g + Λ g − 𝔞 Ξ` (frame components).
pub fn einstein_residual(mp: &MultiPoint, ric: &MixedRicci, cosmological: f64, source: Option<(f64, &[f64])>) -> Vec<f64> {
    let n = mp.dim();
    let mut r = ric.ricci.clone();
    for a in 0..n {
        r[a * n + a] += (cosmological - 0.5 * ric.scalar) * mp.eps(a);
    }
    if let Some((coupling, xi)) = source {
        add_scaled(&mut r, xi, -coupling);
    }
    r
}

/// Covariant frame jets of `U` and its projections.
struct UParts {
    blocks: Vec<Vec<Jet>>,
    perps: Vec<Vec<Jet>>,
}

fn u_parts(mp: &MultiPoint, u: &crate::geometry::VectorFieldDef) -> Result<UParts> {
    let uf = mp.to_frame(&u.jets(mp.geo.point(), mp.geo.order())?);
    let k = mp.k();
    Ok(UParts {
        blocks: (0..k).map(|i| mp.project(&mp.mask(&Dist::Block(i)), &uf)).collect(),
        perps: (0..k).map(|i| mp.project(&mp.mask(&Dist::Perp(i)), &uf)).collect(),
    })
}

/// Metric-variation term of `Q̄(D_i)` for a semi-symmetric contorsion with `U`
/// held fixed, `B` supported on `D_j`: `∂_t Q̄(D_i) = ⟨C, B⟩ − Div Y`.
#[derive(Clone, Debug)]
pub struct SemiSymmetricTerm {
    pub tensor: Vec<f64>,
    /// `Y = c·(tr_g B)·P_{S^c}U` is returned as the scalar `c` and `P_{S^c}U`.
    pub div_coefficient: f64,
    pub div_field: Vec<Jet>,
}

/// For the side `S` of block `i` (`D_j` or `D_i^⊥`):
/// `C = ½(n_c − n_S) Div(P_{S^c}U) g_j − n_c(n_S − 1) P_jU ⊗ P_jU`, `Y = ½(n_c − n_S)(tr B) P_{S^c}U`.
pub fn semi_symmetric_metric_term(
    mp: &MultiPoint,
    u: &crate::geometry::VectorFieldDef,
    j: usize,
    i: usize,
) -> Result<SemiSymmetricTerm> {
    let parts = u_parts(mp, u)?;
    let dims = mp.block_dims();
    let n_all = mp.dim();
    let (ni, nip) = (dims[i], n_all - dims[i]);
    let (ns, nc, v) = if i == j {
        (ni, nip, parts.perps[i].clone())
    } else {
        (nip, ni, parts.blocks[i].clone())
    };
    let (ns, nc) = (ns as f64, nc as f64);
    let pj = values(&parts.blocks[j]);
    let div_v = mp.div_frame(&v).value();
    let mut c = block_metric(mp, j).iter().map(|x| 0.5 * (nc - ns) * div_v * x).collect::<Vec<_>>();
    add_scaled(&mut c, &outer(&pj, &pj), -nc * (ns - 1.0));
    Ok(SemiSymmetricTerm {
        tensor: restrict(c, &mp.mask(&Dist::Block(j))),
        div_coefficient: 0.5 * (nc - ns),
        div_field: v,
    })
}

/// Analytic `∂_t Q̄(D_i)` (every `i`) for a block variation, `U` fixed.
pub fn analytic_semi_symmetric_variation(
    model: &ModelSpec,
    u: &crate::geometry::VectorFieldDef,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<f64>> {
    let base = VariationBase::new(model, fam, p)?;
    let mp = &base.mp;
    let n = mp.dim();
    let mut tr_b = Jet::zero(n, base.b_jets[0].order());
    for a in 0..n {
        tr_b += &base.b_jets[a * n + a].scale(mp.eps(a));
    }
    (0..mp.k())
        .map(|i| {
            let t = semi_symmetric_metric_term(mp, u, base.block, i)?;
            let y: Vec<Jet> = t.div_field.iter().map(|x| (x * &tr_b).scale(t.div_coefficient)).collect();
            Ok(base.pair(&t.tensor) - mp.div_frame(&y).value())
        })
        .collect()
}

/// Finite-difference counterpart, through the general `Q̄` on `g_t`.
pub fn oracle_semi_symmetric_variation(
    model: &ModelSpec,
    u: &crate::geometry::VectorFieldDef,
    fam: &dyn BlockVariation,
    p: &[f64],
) -> Result<Vec<f64>> {
    let c = crate::connections::Contorsion::semi_symmetric(u.clone());
    fd_derivative(
        |t| {
            let mp = varied_point(model, fam, p, 1, t)?;
            let ca = ContorsionAt::for_contorsion(&mp, &c)?;
            Ok((0..mp.k()).map(|i| ca.bar_q(i)).collect())
        },
        FD_STEP,
    )
}

/// Euler–Lagrange residuals of the action restricted to semi-symmetric connections.
#[derive(Clone, Debug)]
pub struct SemiSymmetricEl {
    /// Metric equations, one per block.
    pub metric: Vec<BlockResidual>,
    /// Per block: `2n_i(n_i^⊥−1)P_i^⊥U − (n_i^⊥−n_i)H_i` and
    /// `2n_i^⊥(n_i−1)P_iU − (n_i−n_i^⊥)H_i^⊥` (covariant frame components).
    pub u_block: Vec<(Vec<f64>, Vec<f64>)>,
    /// `G` with `∂_s Σ_i Q̄(D_i, U + sV) = ⟨G, V⟩`.
    pub u_gradient: Vec<f64>,
}

/// The semi-symmetric tensors `𝒬̄_j = Σ_i C_i` for every block.
pub fn semi_symmetric_tensors(mp: &MultiPoint, u: &crate::geometry::VectorFieldDef) -> Result<Vec<Vec<f64>>> {
    let n = mp.dim();
    (0..mp.k())
        .map(|j| {
            let mut c = vec![0.0; n * n];
            for i in 0..mp.k() {
                add_scaled(&mut c, &semi_symmetric_metric_term(mp, u, j, i)?.tensor, 1.0);
            }
            Ok(c)
        })
        .collect()
}

pub fn semi_symmetric_el(model: &ModelSpec, p: &[f64], lambda: Option<&[f64]>) -> Result<SemiSymmetricEl> {
    let crate::connections::ContorsionKind::SemiSymmetric { u } = model.contorsion.kind() else {
        return Err(GeometryError::Invalid("model contorsion is not semi-symmetric".into()));
    };
    let mp = model.at(p, 3)?;
    let n = mp.dim();
    let ca = ContorsionAt::for_contorsion(&mp, &model.contorsion)?;
    let half_sum: f64 = 0.5 * (0..mp.k()).map(|i| mp.q_function(i) + ca.bar_q(i)).sum::<f64>();
    let tensors = semi_symmetric_tensors(&mp, u)?;
    let mut metric = Vec::new();
    for (j, qb) in tensors.iter().enumerate() {
        let mut r = q_tensor(&mp, j);
        add_scaled(&mut r, qb, 1.0);
        add_scaled(&mut r, &block_metric(&mp, j), half_sum);
        metric.push(BlockResidual::build(&mp, j, r, lambda.map(|l| l[j])));
    }
    let parts = u_parts(&mp, u)?;
    let dims = mp.block_dims();
    let ex = mp.extrinsic();
    let mut u_block = Vec::new();
    let mut grad = vec![0.0; n];
    for i in 0..mp.k() {
        let (ni, nip) = (dims[i] as f64, (n - dims[i]) as f64);
        let h = values(&ex.blocks[i].mean);
        let hp = values(&ex.perps[i].mean);
        let pu = values(&parts.blocks[i]);
        let ppu = values(&parts.perps[i]);
        let r1: Vec<f64> = (0..n).map(|c| 2.0 * ni * (nip - 1.0) * ppu[c] - (nip - ni) * h[c]).collect();
        let r2: Vec<f64> = (0..n).map(|c| 2.0 * nip * (ni - 1.0) * pu[c] - (ni - nip) * hp[c]).collect();
        for c in 0..n {
            grad[c] -= r1[c] + r2[c];
        }
        u_block.push((r1, r2));
    }
    Ok(SemiSymmetricEl {
        metric,
        u_block,
        u_gradient: grad,
    })
}

/// Finite-difference `∂_s Σ_i Q̄(D_i, U + sV)` for a chart vector field `V`.
pub fn oracle_u_derivative(model: &ModelSpec, v: &crate::geometry::VectorFieldDef, p: &[f64]) -> Result<f64> {
    let crate::connections::ContorsionKind::SemiSymmetric { u } = model.contorsion.kind() else {
        return Err(GeometryError::Invalid("model contorsion is not semi-symmetric".into()));
    };
    let mp = model.at(p, 2)?;
    let d = fd_derivative(
        |s| {
            let comps = u
                .components
                .iter()
                .zip(&v.components)
                .map(|(a, b)| a.clone() + Expr::constant(s) * b.clone())
                .collect();
            let c = crate::connections::Contorsion::semi_symmetric(crate::geometry::VectorFieldDef::new(comps));
            let ca = ContorsionAt::for_contorsion(&mp, &c)?;
            Ok(vec![(0..mp.k()).map(|i| ca.bar_q(i)).sum()])
        },
        FD_STEP,
    )?;
    Ok(d[0])
}

/// Explicit semi-symmetric mixed Ricci tensor on `D_j × D_j`:
/// `−𝒬_j + μ_j g_j + Σ_i [c_i P_jU⊗P_jU − d_i Div(V_i) g_j] + (Z_j / n_j) g_j`,
/// with `μ` from `𝒬` alone and `Z_j = tr_{g_j} 𝒬̄_j`.
pub fn semi_symmetric_mixed_ricci_explicit(model: &ModelSpec, p: &[f64]) -> Result<MixedRicci> {
    let crate::connections::ContorsionKind::SemiSymmetric { u } = model.contorsion.kind() else {
        return Err(GeometryError::Invalid("model contorsion is not semi-symmetric".into()));
    };
    let mp = model.at(p, 3)?;
    let n = mp.dim();
    let k = mp.k();
    let dims = mp.block_dims();
    let parts = u_parts(&mp, u)?;
    let qs: Vec<Vec<f64>> = (0..k).map(|j| q_tensor(&mp, j)).collect();
    let mu = mu_solve(&dims, &mu_rhs(&mp, &qs))?;
    let mut ricci = vec![0.0; n * n];
    let mut mu_bar = Vec::with_capacity(k);
    for j in 0..k {
        let pj = values(&parts.blocks[j]);
        let pj2 = mp.dot(&pj, &pj);
        let nj = dims[j] as f64;
        let mut blk: Vec<f64> = qs[j].iter().map(|x| -x).collect();
        let mut z = 0.0;
        let mut div_sum = 0.0;
        let mut coef = 0.0;
        for i in 0..k {
            let (ni, nip) = (dims[i] as f64, (n - dims[i]) as f64);
            let (c, d, v) = if i == j {
                (nip * (ni - 1.0), 0.5 * (nip - ni), &parts.perps[i])
            } else {
                (ni * (nip - 1.0), 0.5 * (ni - nip), &parts.blocks[i])
            };
            let dv = mp.div_frame(v).value();
            coef += c;
            div_sum += d * dv;
            z += nj * d * dv - c * pj2;
        }
        add_scaled(&mut blk, &outer(&pj, &pj), coef);
        add_scaled(&mut blk, &block_metric(&mp, j), mu[j] - div_sum + z / nj);
        add_scaled(&mut ricci, &restrict(blk, &mp.mask(&Dist::Block(j))), 1.0);
        mu_bar.push(mu[j] + z / nj);
    }
    symmetrize(&mut ricci, n);
    let scalar = (0..n).map(|a| mp.eps(a) * ricci[a * n + a]).sum();
    Ok(MixedRicci {
        ricci,
        scalar,
        mu: mu_bar,
    })
}

/// Generic assembly of the semi-symmetric mixed Ricci tensor from `𝒬_j + 𝒬̄_j`.
pub fn semi_symmetric_mixed_ricci(model: &ModelSpec, p: &[f64]) -> Result<MixedRicci> {
    let crate::connections::ContorsionKind::SemiSymmetric { u } = model.contorsion.kind() else {
        return Err(GeometryError::Invalid("model contorsion is not semi-symmetric".into()));
    };
    let mp = model.at(p, 3)?;
    let qb = semi_symmetric_tensors(&mp, u)?;
    let tensors: Vec<Vec<f64>> = (0..mp.k())
        .map(|j| {
            let mut c = q_tensor(&mp, j);
            add_scaled(&mut c, &qb[j], 1.0);
            c
        })
        .collect();
    assemble_mixed_ricci(&mp, &tensors)
}

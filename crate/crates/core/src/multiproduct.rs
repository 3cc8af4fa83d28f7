//! Objects attached to a splitting `TM = D_1 ⊕ … ⊕ D_k` into pairwise
//! orthogonal non-degenerate distributions.
//!
//! Frame-level conventions: `E_a` is the adapted orthonormal frame with signs
//! `ε_a`; a vector is stored by its covariant frame components `v_c = ⟨V, E_c⟩`
//! (so `V = Σ ε_c v_c E_c`); a bilinear form by `B(E_a, E_b)`; and a (1,2)
//! tensor `P` by `⟨P(E_a, E_b), E_c⟩` at `[(a*n + b)*n + c]`.
//!
//! A "side" is any union of blocks given as a frame-index mask. For the side
//! `S` with complement `S^c`, the second fundamental form and integrability
//! tensor are `h(E_a,E_b)_c = ½(ω_abc + ω_bac)`, `T(E_a,E_b)_c = ½(ω_abc − ω_bac)`
//! for `a, b ∈ S`, `c ∈ S^c`, where `ω_abc = ⟨∇_{E_a}E_b, E_c⟩`.

use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{GeometryError, Result};
use crate::geometry::{MetricField, PointGeometry, VectorFieldDef};
use crate::jet::Jet;

/// Relative tolerance for validating block orthogonality.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// The k-block decomposition, each block spanned by declared vector fields.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingSpec {
    n: usize,
    blocks: Vec<Vec<VectorFieldDef>>,
}

impl SplittingSpec {
    pub fn new(n: usize, blocks: Vec<Vec<VectorFieldDef>>) -> Result<SplittingSpec> {
        if blocks.len() < 2 {
            return Err(GeometryError::InvalidSplitting("need at least two blocks".into()));
        }
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(GeometryError::InvalidSplitting("empty block".into()));
        }
        let total: usize = blocks.iter().map(Vec::len).sum();
        if total != n {
            return Err(GeometryError::InvalidSplitting(format!(
                "block dimensions sum to {total}, chart dimension is {n}"
            )));
        }
        if blocks.iter().flatten().any(|v| v.components.len() != n) {
            return Err(GeometryError::InvalidSplitting(
                "spanning field with wrong number of components".into(),
            ));
        }
        Ok(SplittingSpec { n, blocks })
    }

    /// Consecutive coordinate blocks of the given sizes.
    pub fn coordinate(partition: &[usize]) -> Result<SplittingSpec> {
        let n: usize = partition.iter().sum();
        let mut next = 0;
        let blocks = partition
            .iter()
            .map(|&d| {
                let b = (next..next + d)
                    .map(|i| VectorFieldDef::coordinate(n, i))
                    .collect();
                next += d;
                b
            })
            .collect();
        SplittingSpec::new(n, blocks)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn blocks(&self) -> &[Vec<VectorFieldDef>] {
        &self.blocks
    }

    /// Frame index ranges of each block.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.len();
                start += b.len();
                r
            })
            .collect()
    }
}

/// Pointwise g-orthonormal frame adapted to the blocks, as jets.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    /// `vectors[a][k]`: chart component `k` of `E_a`.
    pub vectors: Vec<Vec<Jet>>,
    pub eps: Vec<f64>,
    pub ranges: Vec<Range<usize>>,
}

impl AdaptedFrame {
    /// Blockwise Gram–Schmidt of the spanning fields in declaration order.
    pub fn build(geo: &PointGeometry, split: &SplittingSpec, order: usize) -> Result<AdaptedFrame> {
        let p = geo.point();
        let n = geo.dim();
        if split.dim() != n {
            return Err(GeometryError::InvalidSplitting("splitting dimension mismatch".into()));
        }
        let ranges = split.ranges();
        let mut raw: Vec<(usize, Vec<Jet>)> = Vec::with_capacity(n);
        for (bi, block) in split.blocks().iter().enumerate() {
            for v in block {
                raw.push((bi, v.jets(p, order)?));
            }
        }
        for (x, (bx, vx)) in raw.iter().enumerate() {
            for (by, vy) in raw.iter().skip(x + 1) {
                if bx == by {
                    continue;
                }
                let ip = geo.inner(vx, vy).value();
                let scale = (geo.inner(vx, vx).value().abs() * geo.inner(vy, vy).value().abs()).sqrt();
                if ip.abs() > ORTHOGONALITY_TOL * scale.max(1.0) {
                    return Err(GeometryError::InvalidSplitting(format!(
                        "blocks {bx} and {by} are not orthogonal at {p:?} (inner product {ip:e})"
                    )));
                }
            }
        }
        let mut vectors: Vec<Vec<Jet>> = Vec::with_capacity(n);
        let mut eps = Vec::with_capacity(n);
        for (bi, range) in ranges.iter().enumerate() {
            for a in range.clone() {
                let v = &raw[a].1;
                let mut u = v.clone();
                for c in range.start..a {
                    let coef = geo.inner(v, &vectors[c]).scale(eps[c]);
                    for k in 0..n {
                        let t = &coef * &vectors[c][k];
                        u[k] -= &t;
                    }
                }
                let s = geo.inner(&u, &u);
                let norm_v = geo.inner(v, v).value().abs();
                if s.value().abs() <= 1e-12 * norm_v.max(1e-300) || s.value() == 0.0 {
                    return Err(GeometryError::DegenerateBlock {
                        block: bi,
                        point: p.to_vec(),
                    });
                }
                let sign = s.value().signum();
                let inv = s.scale(sign).sqrt().recip();
                vectors.push(u.iter().map(|x| x * &inv).collect());
                eps.push(sign);
            }
        }
        Ok(AdaptedFrame {
            vectors,
            eps,
            ranges,
        })
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    /// Chart components of the frame at the base point, `values()[a][k]`.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(Jet::value).collect())
            .collect()
    }

    pub fn block_of(&self, a: usize) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(&a))
            .expect("frame index within range")
    }
}

/// Which distribution a computation refers to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dist {
    /// `D_i`.
    Block(usize),
    /// `D_i^⊥`.
    Perp(usize),
    /// Direct sum of the listed blocks.
    Union(Vec<usize>),
}

/// Extrinsic data of one side: `h`, `T` and `H`, frame components, as jets.
#[derive(Clone, Debug)]
pub struct SideTensors {
    pub mask: Vec<bool>,
    pub h: Vec<Jet>,
    pub t: Vec<Jet>,
    pub mean: Vec<Jet>,
}

/// Extrinsic data of every block and its orthogonal complement.
#[derive(Clone, Debug)]
pub struct ExtrinsicData {
    pub blocks: Vec<SideTensors>,
    pub perps: Vec<SideTensors>,
}

/// Quadratic invariants of one block `D_i` and its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticInvariants {
    /// `𝒜_i`, `𝒯_i`, `𝒦_i` as bilinear forms on `D_i` (frame components, `n × n`).
    pub casorati: Vec<f64>,
    pub twist: Vec<f64>,
    pub k_tensor: Vec<f64>,
    /// `Ψ_i` on `D_i^⊥ × D_i^⊥`.
    pub psi: Vec<f64>,
    /// The same four objects for the side `D_i^⊥`.
    pub casorati_perp: Vec<f64>,
    pub twist_perp: Vec<f64>,
    pub k_tensor_perp: Vec<f64>,
    pub psi_perp: Vec<f64>,
    pub hh: f64,
    pub tt: f64,
    pub mean_sq: f64,
    pub hh_perp: f64,
    pub tt_perp: f64,
    pub mean_sq_perp: f64,
}

/// Mixed scalar curvatures at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedScalar {
    /// `pairs[i][j] = S(D_i, D_j)` (symmetric, zero diagonal).
    pub pairs: Vec<Vec<f64>>,
    pub total: f64,
    /// `S_{D_i, D_i^⊥}`, each mixed plane averaged over both orderings.
    pub per_block: Vec<f64>,
}

/// Geometry of a splitting at one point.
pub struct MultiPoint {
    pub geo: PointGeometry,
    pub frame: AdaptedFrame,
    n: usize,
    /// `ω_abc = ⟨∇_{E_a}E_b, E_c⟩`.
    omega: Vec<Jet>,
    /// Dual coframe `θ^a_i`, with `θ^a(E_b) = δ^a_b`.
    coframe: Vec<Vec<Jet>>,
    frame_values: Vec<Vec<f64>>,
    extrinsic: OnceLock<ExtrinsicData>,
    frame_curvature: OnceLock<Vec<f64>>,
}

impl std::fmt::Debug for MultiPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiPoint")
            .field("point", &self.geo.point())
            .field("eps", &self.frame.eps)
            .finish()
    }
}

impl MultiPoint {
    /// Metric expanded to `order`; frame connection coefficients then carry
    /// `order - 1`. Order 2 suffices for curvature and first derivatives of
    /// extrinsic tensors.
    pub fn at(g: &MetricField, split: &SplittingSpec, p: &[f64], order: usize) -> Result<MultiPoint> {
        MultiPoint::from_geometry(g.at(p, order)?, split)
    }

    pub fn from_geometry(geo: PointGeometry, split: &SplittingSpec) -> Result<MultiPoint> {
        let order = geo.order();
        let frame = AdaptedFrame::build(&geo, split, order)?;
        let n = geo.dim();
        let mut omega = Vec::with_capacity(n * n * n);
        let mut nab = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                nab.push(geo.nabla(&frame.vectors[a], &frame.vectors[b]));
            }
        }
        for a in 0..n {
            for b in 0..n {
                let lowered = geo.lower(&nab[a * n + b]);
                for c in 0..n {
                    let mut acc = Jet::zero(n, nab[0][0].order());
                    for k in 0..n {
                        acc.add_product(&lowered[k], &frame.vectors[c][k]);
                    }
                    omega.push(acc);
                }
            }
        }
        let coframe = frame
            .vectors
            .iter()
            .zip(&frame.eps)
            .map(|(v, &e)| geo.lower(v).iter().map(|x| x.scale(e)).collect())
            .collect();
        let frame_values = frame.values();
        Ok(MultiPoint {
            geo,
            frame,
            n,
            omega,
            coframe,
            frame_values,
            extrinsic: OnceLock::new(),
            frame_curvature: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.frame.ranges.len()
    }

    pub fn eps(&self, a: usize) -> f64 {
        self.frame.eps[a]
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.frame.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn omega(&self, a: usize, b: usize, c: usize) -> &Jet {
        &self.omega[(a * self.n + b) * self.n + c]
    }

    pub fn mask(&self, d: &Dist) -> Vec<bool> {
        let n = self.n;
        let mut m = vec![false; n];
        let mut set = |i: usize| {
            for a in self.frame.ranges[i].clone() {
                m[a] = true;
            }
        };
        match d {
            Dist::Block(i) => set(*i),
            Dist::Perp(i) => {
                for j in 0..self.k() {
                    if j != *i {
                        set(j);
                    }
                }
            }
            Dist::Union(list) => {
                for &i in list {
                    set(i);
                }
            }
        }
        m
    }

    /// Orthogonal projection of covariant frame components onto a side.
    pub fn project(&self, mask: &[bool], v: &[Jet]) -> Vec<Jet> {
        v.iter()
            .enumerate()
            .map(|(c, x)| if mask[c] { x.clone() } else { Jet::zero(self.n, x.order()) })
            .collect()
    }

    /// Chart components of a vector given by covariant frame components.
    pub fn to_chart(&self, v: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let order = v.iter().map(Jet::order).min().unwrap_or(0);
        (0..n)
            .map(|k| {
                let mut acc = Jet::zero(n, order);
                for c in 0..n {
                    let t = v[c].scale(self.frame.eps[c]);
                    acc.add_product(&t, &self.frame.vectors[c][k]);
                }
                acc
            })
            .collect()
    }

    /// Covariant frame components of a chart vector.
    pub fn to_frame(&self, x: &[Jet]) -> Vec<Jet> {
        let lowered = self.geo.lower(x);
        let n = self.n;
        let order = lowered.iter().map(Jet::order).min().unwrap_or(0);
        (0..n)
            .map(|c| {
                let mut acc = Jet::zero(n, order);
                for k in 0..n {
                    acc.add_product(&lowered[k], &self.frame.vectors[c][k]);
                }
                acc
            })
            .collect()
    }

    /// Second fundamental form, integrability tensor and mean curvature of a side.
    pub fn side_tensors(&self, mask: &[bool]) -> SideTensors {
        let n = self.n;
        let order = self.omega[0].order();
        let zero = Jet::zero(n, order);
        let mut h = vec![zero.clone(); n * n * n];
        let mut t = vec![zero.clone(); n * n * n];
        let mut mean = vec![zero; n];
        for a in (0..n).filter(|&a| mask[a]) {
            for b in (0..n).filter(|&b| mask[b]) {
                for c in (0..n).filter(|&c| !mask[c]) {
                    let (x, y) = (self.omega(a, b, c), self.omega(b, a, c));
                    h[(a * n + b) * n + c] = (x + y).scale(0.5);
                    t[(a * n + b) * n + c] = (x - y).scale(0.5);
                }
            }
            for c in (0..n).filter(|&c| !mask[c]) {
                let v = h[(a * n + a) * n + c].scale(self.frame.eps[a]);
                mean[c] += &v;
            }
        }
        SideTensors {
            mask: mask.to_vec(),
            h,
            t,
            mean,
        }
    }

    pub fn extrinsic(&self) -> &ExtrinsicData {
        self.extrinsic.get_or_init(|| ExtrinsicData {
            blocks: (0..self.k())
                .map(|i| self.side_tensors(&self.mask(&Dist::Block(i))))
                .collect(),
            perps: (0..self.k())
                .map(|i| self.side_tensors(&self.mask(&Dist::Perp(i))))
                .collect(),
        })
    }

    pub fn side(&self, d: &Dist) -> SideTensors {
        match d {
            Dist::Block(i) => self.extrinsic().blocks[*i].clone(),
            Dist::Perp(i) => self.extrinsic().perps[*i].clone(),
            Dist::Union(_) => self.side_tensors(&self.mask(d)),
        }
    }

    /// `⟨V, W⟩` of covariant frame components (values).
    pub fn dot(&self, v: &[f64], w: &[f64]) -> f64 {
        (0..self.n).map(|c| self.frame.eps[c] * v[c] * w[c]).sum()
    }

    /// `⟨P, P'⟩ = Σ ε_a ε_b ε_c P_abc P'_abc` for (1,2) frame arrays.
    pub fn dot12(&self, p: &[f64], q: &[f64]) -> f64 {
        let n = self.n;
        let e = &self.frame.eps;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let k = (a * n + b) * n + c;
                    s += e[a] * e[b] * e[c] * p[k] * q[k];
                }
            }
        }
        s
    }

    /// `⟨B, C⟩ = Σ ε_a ε_b B_ab C_ab` for bilinear forms.
    pub fn dot02(&self, b: &[f64], c: &[f64]) -> f64 {
        let n = self.n;
        let e = &self.frame.eps;
        let mut s = 0.0;
        for a in 0..n {
            for d in 0..n {
                s += e[a] * e[d] * b[a * n + d] * c[a * n + d];
            }
        }
        s
    }

    /// `tr_g B = Σ ε_a B_aa`, optionally restricted to a side.
    pub fn trace02(&self, b: &[f64], mask: Option<&[bool]>) -> f64 {
        (0..self.n)
            .filter(|&a| mask.map_or(true, |m| m[a]))
            .map(|a| self.frame.eps[a] * b[a * self.n + a])
            .sum()
    }

    /// Quadratic invariants of block `i`.
    pub fn quadratic_invariants(&self, i: usize) -> QuadraticInvariants {
        let ex = self.extrinsic();
        let (s, sp) = (&ex.blocks[i], &ex.perps[i]);
        let hv = values(&s.h);
        let tv = values(&s.t);
        let hpv = values(&sp.h);
        let tpv = values(&sp.t);
        let mv = values(&s.mean);
        let mpv = values(&sp.mean);
        QuadraticInvariants {
            casorati: self.operator_square_sum(&s.mask, &hv, &hv),
            twist: self.operator_square_sum(&s.mask, &tv, &tv),
            k_tensor: self.commutator_sum(&s.mask, &tv, &hv),
            psi: self.psi(&s.mask, &hv, &tv),
            casorati_perp: self.operator_square_sum(&sp.mask, &hpv, &hpv),
            twist_perp: self.operator_square_sum(&sp.mask, &tpv, &tpv),
            k_tensor_perp: self.commutator_sum(&sp.mask, &tpv, &hpv),
            psi_perp: self.psi(&sp.mask, &hpv, &tpv),
            hh: self.dot12(&hv, &hv),
            tt: self.dot12(&tv, &tv),
            mean_sq: self.dot(&mv, &mv),
            hh_perp: self.dot12(&hpv, &hpv),
            tt_perp: self.dot12(&tpv, &tpv),
            mean_sq_perp: self.dot(&mpv, &mpv),
        }
    }

    /// `Σ_{c ∉ S} ε_c (X_c Y_c)♭` on `S × S`, where `⟨X_c E_a, E_b⟩ = x_abc`.
    pub fn operator_square_sum(&self, mask: &[bool], x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let e = &self.frame.eps;
        let mut out = vec![0.0; n * n];
        for a in (0..n).filter(|&a| mask[a]) {
            for b in (0..n).filter(|&b| mask[b]) {
                let mut s = 0.0;
                for c in (0..n).filter(|&c| !mask[c]) {
                    for d in (0..n).filter(|&d| mask[d]) {
                        // ⟨X_c Y_c E_a, E_b⟩ = Σ_d ε_d ⟨Y_c E_a, E_d⟩⟨X_c E_d, E_b⟩
                        s += e[c] * e[d] * y[(a * n + d) * n + c] * x[(d * n + b) * n + c];
                    }
                }
                out[a * n + b] = s;
            }
        }
        out
    }

    /// `Σ_{c ∉ S} ε_c [T♯_c, A_c]♭`.
    pub fn commutator_sum(&self, mask: &[bool], t: &[f64], h: &[f64]) -> Vec<f64> {
        let ta = self.operator_square_sum(mask, t, h);
        let at = self.operator_square_sum(mask, h, t);
        ta.iter().zip(&at).map(|(x, y)| x - y).collect()
    }

    /// `Ψ(X, Y) = tr(A_Y A_X + T♯_Y T♯_X)` for `X, Y ∉ S`.
    pub fn psi(&self, mask: &[bool], h: &[f64], t: &[f64]) -> Vec<f64> {
        let n = self.n;
        let e = &self.frame.eps;
        let mut out = vec![0.0; n * n];
        for c in (0..n).filter(|&c| !mask[c]) {
            for d in (0..n).filter(|&d| !mask[d]) {
                let mut s = 0.0;
                for a in (0..n).filter(|&a| mask[a]) {
                    for b in (0..n).filter(|&b| mask[b]) {
                        // X = E_c, Y = E_d
                        s += e[a]
                            * e[b]
                            * (h[(a * n + b) * n + c] * h[(b * n + a) * n + d]
                                + t[(a * n + b) * n + c] * t[(b * n + a) * n + d]);
                    }
                }
                out[c * n + d] = s;
            }
        }
        out
    }

    /// `⟨R_{E_a,E_b}E_c, E_d⟩` at the base point, `[((a*n+b)*n+c)*n+d]`.
    pub fn frame_curvature(&self) -> &[f64] {
        self.frame_curvature.get_or_init(|| {
            let r: Vec<f64> = self.geo.riemann().iter().map(Jet::value).collect();
            self.frame_13(&r)
        })
    }

    /// Lowers and frames a chart (1,3) tensor given by values.
    pub fn frame_13(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let g: Vec<f64> = (0..n * n).map(|k| self.geo.metric(k / n, k % n).value()).collect();
        let mut low = vec![0.0; n * n * n * n];
        for ijk in 0..n * n * n {
            for m in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += r[ijk * n + l] * g[l * n + m];
                }
                low[ijk * n + m] = s;
            }
        }
        let mut cur = low;
        // contract each slot with frame vectors, last slot first
        for _slot in 0..4 {
            let mut next = vec![0.0; n * n * n * n];
            for idx in 0..n * n * n {
                for a in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += cur[idx * n + l] * self.frame_values[a][l];
                    }
                    // rotate: new layout puts the framed index first
                    next[a * n * n * n + idx] = s;
                }
            }
            cur = next;
        }
        cur
    }

    /// Mixed scalar curvature from a framed (0,4) curvature array.
    pub fn mixed_scalar_from(&self, rf: &[f64]) -> MixedScalar {
        let n = self.n;
        let k = self.k();
        let e = &self.frame.eps;
        let at = |a: usize, b: usize, c: usize, d: usize| rf[((a * n + b) * n + c) * n + d];
        let mut pairs = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let mut s = 0.0;
                for a in self.frame.ranges[i].clone() {
                    for b in self.frame.ranges[j].clone() {
                        s += 0.5 * e[a] * e[b] * (at(a, b, a, b) + at(b, a, b, a));
                    }
                }
                pairs[i][j] = s;
            }
        }
        let mut per_block = vec![0.0; k];
        for i in 0..k {
            let mut s = 0.0;
            for a in self.frame.ranges[i].clone() {
                for b in (0..n).filter(|b| !self.frame.ranges[i].contains(b)) {
                    s += 0.5 * e[a] * e[b] * (at(a, b, a, b) + at(b, a, b, a));
                }
            }
            per_block[i] = s;
        }
        let mut total = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                total += pairs[i][j];
            }
        }
        MixedScalar {
            pairs,
            total,
            per_block,
        }
    }

    pub fn mixed_scalar(&self) -> MixedScalar {
        self.mixed_scalar_from(self.frame_curvature())
    }

    /// Partial Ricci tensor `r_{D_i}` (frame components, supported on `D_i^⊥`).
    pub fn partial_ricci(&self, i: usize) -> Vec<f64> {
        let n = self.n;
        let rf = self.frame_curvature();
        let e = &self.frame.eps;
        let r = &self.frame.ranges[i];
        let mut out = vec![0.0; n * n];
        for c in (0..n).filter(|c| !r.contains(c)) {
            for d in (0..n).filter(|d| !r.contains(d)) {
                out[c * n + d] = r
                    .clone()
                    .map(|a| e[a] * rf[((a * n + c) * n + a) * n + d])
                    .sum();
            }
        }
        out
    }

    /// `Σ_{b ∉ D_i} ε_b ⟨R_{E_b,X}E_b, Y⟩` on `D_i × D_i`.
    pub fn partial_ricci_dual(&self, i: usize) -> Vec<f64> {
        let n = self.n;
        let rf = self.frame_curvature();
        let e = &self.frame.eps;
        let r = &self.frame.ranges[i];
        let mut out = vec![0.0; n * n];
        for c in r.clone() {
            for d in r.clone() {
                out[c * n + d] = (0..n)
                    .filter(|b| !r.contains(b))
                    .map(|b| e[b] * rf[((b * n + c) * n + b) * n + d])
                    .sum();
            }
        }
        out
    }

    /// `r = ½ Σ_i r_{D_i}`.
    pub fn total_partial_ricci(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..self.k() {
            for (o, x) in out.iter_mut().zip(self.partial_ricci(i)) {
                *o += 0.5 * x;
            }
        }
        out
    }

    /// `Q(D_i, g)`.
    pub fn q_function(&self, i: usize) -> f64 {
        let q = self.quadratic_invariants(i);
        q.mean_sq_perp + q.mean_sq - q.hh - q.hh_perp + q.tt + q.tt_perp
    }

    /// `Div` of a vector field given by covariant frame components (jets).
    pub fn div_frame(&self, v: &[Jet]) -> Jet {
        self.geo.div(&self.to_chart(v))
    }

    /// `Σ_{a ∈ S} ε_a ⟨∇_{E_a} X, E_a⟩` for a chart vector field `X`.
    pub fn partial_divergence(&self, x: &[Jet], mask: &[bool]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in (0..n).filter(|&a| mask[a]) {
            let ev: Vec<Jet> = self.frame.vectors[a].iter().map(|j| j.truncate(0)).collect();
            let d = self.geo.nabla(&ev, x);
            let dv: Vec<f64> = d.iter().map(Jet::value).collect();
            let ipv = self.inner_values(&dv, &self.frame_values[a]);
            s += self.frame.eps[a] * ipv;
        }
        s
    }

    fn inner_values(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.geo.metric(i, j).value() * x[i] * y[j];
            }
        }
        s
    }

    /// `Def_S Z (E_a, E_b) = ½(⟨∇_{E_a}Z, E_b⟩ + ⟨∇_{E_b}Z, E_a⟩)` for `a, b ∈ S`.
    pub fn deformation(&self, z: &[Jet], mask: &[bool]) -> Vec<f64> {
        let n = self.n;
        let mut nz = vec![vec![0.0; n]; n];
        for a in 0..n {
            let ev: Vec<Jet> = self.frame.vectors[a].iter().map(|j| j.truncate(0)).collect();
            let d = self.geo.nabla(&ev, z);
            let dv: Vec<f64> = d.iter().map(Jet::value).collect();
            for b in 0..n {
                nz[a][b] = self.inner_values(&dv, &self.frame_values[b]);
            }
        }
        let mut out = vec![0.0; n * n];
        for a in (0..n).filter(|&a| mask[a]) {
            for b in (0..n).filter(|&b| mask[b]) {
                out[a * n + b] = 0.5 * (nz[a][b] + nz[b][a]);
            }
        }
        out
    }

    /// Chart (1,2) tensor `P^k_{ij}` of a frame (1,2) array given as jets.
    pub fn chart_12(&self, p: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let order = p.iter().map(Jet::order).min().unwrap_or(0);
        let e = &self.frame.eps;
        // vector part: V_ab^k = Σ_c ε_c p_abc E_c^k
        let mut out = vec![Jet::zero(n, order); n * n * n];
        for a in 0..n {
            for b in 0..n {
                let mut vec_ab: Option<Vec<Jet>> = None;
                for c in 0..n {
                    let x = &p[(a * n + b) * n + c];
                    if crate::geometry::is_zero(x) {
                        continue;
                    }
                    let v = vec_ab.get_or_insert_with(|| vec![Jet::zero(n, order); n]);
                    let xs = x.scale(e[c]);
                    for k in 0..n {
                        v[k].add_product(&xs, &self.frame.vectors[c][k]);
                    }
                }
                let Some(v) = vec_ab else { continue };
                for i in 0..n {
                    for j in 0..n {
                        let w = &self.coframe[a][i] * &self.coframe[b][j];
                        for k in 0..n {
                            out[(i * n + j) * n + k].add_product(&w, &v[k]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Frame components `B(E_a, E_b)` of a chart (0,2) tensor given by values.
    pub fn frame_02(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let f = &self.frame_values;
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += f[a][i] * f[c][j] * b[i * n + j];
                    }
                }
                out[a * n + c] = s;
            }
        }
        out
    }

    /// Full divergence of a frame (1,2) jet array, as frame (0,2) values.
    pub fn div_12_frame(&self, p: &[Jet]) -> Vec<f64> {
        let chart = self.chart_12(p);
        let d: Vec<f64> = self.geo.div_12(&chart).iter().map(Jet::value).collect();
        self.frame_02(&d)
    }

    /// Partial divergence `Σ_{c ∈ S} ε_c ⟨(∇_{E_c} P)(·,·), E_c⟩` of a frame (1,2) array.
    pub fn partial_div_12_frame(&self, p: &[Jet], mask: &[bool]) -> Vec<f64> {
        let n = self.n;
        let chart = self.chart_12(p);
        let dp = self.geo.covariant_derivative_12(&chart);
        let f = &self.frame_values;
        let g: Vec<f64> = (0..n * n).map(|k| self.geo.metric(k / n, k % n).value()).collect();
        let mut out_chart = vec![0.0; n * n];
        for c in (0..n).filter(|&c| mask[c]) {
            let mut ec_low = vec![0.0; n];
            for k in 0..n {
                for l in 0..n {
                    ec_low[k] += g[k * n + l] * f[c][l];
                }
            }
            for ij in 0..n * n {
                let mut s = 0.0;
                for m in 0..n {
                    for k in 0..n {
                        s += f[c][m] * dp[(m * n * n + ij) * n + k].value() * ec_low[k];
                    }
                }
                out_chart[ij] += self.frame.eps[c] * s;
            }
        }
        self.frame_02(&out_chart)
    }

    /// `Υ_{P1,P2}` as frame (0,2) values.
    pub fn upsilon(&self, p1: &[f64], p2: &[f64]) -> Vec<f64> {
        upsilon(&self.frame.eps, p1, p2)
    }

    /// Mixed totally geodesic / mixed integrable flags for the pair `(i, j)`.
    pub fn mixed_pair_flags(&self, i: usize, j: usize, tol: f64) -> MixedPairFlags {
        let (h, t) = self.mixed_residuals(&[i, j], i, j);
        MixedPairFlags {
            mixed_totally_geodesic: h <= tol,
            mixed_integrable: t <= tol,
            h_residual: h,
            t_residual: t,
        }
    }

    /// Largest `|h_q(X,Y)|`, `|T_q(X,Y)|` over `X ∈ D_{q1}`, `Y ∈ D_{q2}` for
    /// the distribution `D_q = ⊕_{l∈q} D_l`.
    fn mixed_residuals(&self, q: &[usize], q1: usize, q2: usize) -> (f64, f64) {
        let mask = self.mask(&Dist::Union(q.to_vec()));
        let (mut hmax, mut tmax) = (0.0f64, 0.0f64);
        for a in self.frame.ranges[q1].clone() {
            for b in self.frame.ranges[q2].clone() {
                for c in (0..self.n).filter(|&c| !mask[c]) {
                    let (x, y) = (self.omega(a, b, c).value(), self.omega(b, a, c).value());
                    hmax = hmax.max((0.5 * (x + y)).abs());
                    tmax = tmax.max((0.5 * (x - y)).abs());
                }
            }
        }
        (hmax, tmax)
    }

    /// Maximal mixed residuals over all index subsets of size ≥ 2 and ordered
    /// pairs of distinct members.
    pub fn multi_index_check(&self) -> (f64, f64) {
        let k = self.k();
        let (mut hmax, mut tmax) = (0.0f64, 0.0f64);
        for bits in 0u32..(1 << k) {
            let q: Vec<usize> = (0..k).filter(|i| bits & (1 << i) != 0).collect();
            if q.len() < 2 {
                continue;
            }
            for &q1 in &q {
                for &q2 in &q {
                    if q1 == q2 {
                        continue;
                    }
                    let (h, t) = self.mixed_residuals(&q, q1, q2);
                    hmax = hmax.max(h);
                    tmax = tmax.max(t);
                }
            }
        }
        (hmax, tmax)
    }

    /// Elementary symmetric function `σ_m` of the principal curvatures of the
    /// leaves orthogonal to the one-dimensional block `i` (normal `E_a`).
    pub fn sigma_elementary(&self, i: usize, m: usize) -> Result<f64> {
        if self.frame.eps.iter().any(|&e| e < 0.0) {
            return Err(GeometryError::Invalid("σ_m requires a Riemannian metric".into()));
        }
        let r = &self.frame.ranges[i];
        if r.len() != 1 {
            return Err(GeometryError::Invalid("σ_m needs a one-dimensional normal block".into()));
        }
        let nrm = r.start;
        let leaves: Vec<usize> = (0..self.n).filter(|&a| a != nrm).collect();
        let side = &self.extrinsic().perps[i];
        let d = leaves.len();
        let mat = DMatrix::from_fn(d, d, |x, y| {
            side.h[(leaves[x] * self.n + leaves[y]) * self.n + nrm].value()
        });
        let eig = mat.symmetric_eigen().eigenvalues;
        Ok(elementary_symmetric(eig.as_slice(), m))
    }
}

/// Flags of a pair of distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedPairFlags {
    pub mixed_totally_geodesic: bool,
    pub mixed_integrable: bool,
    pub h_residual: f64,
    pub t_residual: f64,
}

/// `Υ_{P1,P2}(X,Y) = Σ ε_λ ε_μ (⟨P1_λμ, X⟩⟨P2_λμ, Y⟩ + ⟨P2_λμ, X⟩⟨P1_λμ, Y⟩)`.
pub fn upsilon(eps: &[f64], p1: &[f64], p2: &[f64]) -> Vec<f64> {
    let n = eps.len();
    let mut out = vec![0.0; n * n];
    for l in 0..n {
        for m in 0..n {
            let w = eps[l] * eps[m];
            let base = (l * n + m) * n;
            for x in 0..n {
                let (a1, a2) = (p1[base + x], p2[base + x]);
                if a1 == 0.0 && a2 == 0.0 {
                    continue;
                }
                for y in 0..n {
                    out[x * n + y] += w * (a1 * p2[base + y] + a2 * p1[base + y]);
                }
            }
        }
    }
    out
}

/// `e_m(λ_1, …, λ_d)`.
pub fn elementary_symmetric(lams: &[f64], m: usize) -> f64 {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for &l in lams {
        for j in (1..=m).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e[m]
}

pub fn values(j: &[Jet]) -> Vec<f64> {
    j.iter().map(Jet::value).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn diag(coords: &[&str], d: &[&str]) -> MetricField {
        MetricField::diagonal(
            coords.iter().map(|s| s.to_string()).collect(),
            d.iter().map(|s| parse_expression(s, coords).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn flat_frame_is_coordinate_frame() {
        let g = diag(&["x", "y", "z"], &["1", "1", "1"]);
        let s = SplittingSpec::coordinate(&[1, 1, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.1, 0.2, 0.3], 2).unwrap();
        assert_eq!(mp.frame.eps, vec![1.0; 3]);
        for (a, v) in mp.frame.values().iter().enumerate() {
            for (k, x) in v.iter().enumerate() {
                assert_eq!(*x, if a == k { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(mp.mixed_scalar().total, 0.0);
        assert_eq!(mp.q_function(0), 0.0);
    }

    #[test]
    fn warped_frame_is_normalized() {
        let g = diag(&["x", "y", "z"], &["1", "(2+cos(x))^2", "(2+sin(x))^2"]);
        let s = SplittingSpec::coordinate(&[1, 1, 1]).unwrap();
        let x = 0.7f64;
        let mp = MultiPoint::at(&g, &s, &[x, 0.2, 0.3], 2).unwrap();
        let f = mp.frame.values();
        assert!((f[1][1] - 1.0 / (2.0 + x.cos())).abs() < 1e-15);
        assert!((f[2][2] - 1.0 / (2.0 + x.sin())).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_signs() {
        let g = diag(&["t", "x"], &["-1", "1"]);
        let s = SplittingSpec::coordinate(&[1, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.0, 0.0], 2).unwrap();
        assert_eq!(mp.frame.eps, vec![-1.0, 1.0]);
    }

    #[test]
    fn degenerate_block_detected() {
        let g = MetricField::new(
            vec!["t".into(), "x".into(), "y".into()],
            vec![
                vec![Expr::constant(-1.0), Expr::zero(), Expr::zero()],
                vec![Expr::zero(), Expr::one(), Expr::zero()],
                vec![Expr::zero(), Expr::zero(), Expr::one()],
            ],
        )
        .unwrap();
        // null vector ∂t + ∂x spans the first block
        let null = VectorFieldDef::new(vec![Expr::one(), Expr::one(), Expr::zero()]);
        let other = VectorFieldDef::new(vec![Expr::one(), Expr::constant(-1.0), Expr::zero()]);
        let s = SplittingSpec::new(3, vec![vec![null], vec![other], vec![VectorFieldDef::coordinate(3, 2)]]);
        let err = MultiPoint::at(&g, &s.unwrap(), &[0.0; 3], 2).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateBlock { .. } | GeometryError::InvalidSplitting(_)));
    }

    use crate::expr::Expr;

    #[test]
    fn warped_surface_closed_forms() {
        let g = diag(&["x", "y"], &["1", "(2+cos(x))^2"]);
        let s = SplittingSpec::coordinate(&[1, 1]).unwrap();
        for &x in &[0.3, 1.7, -2.2] {
            let mp = MultiPoint::at(&g, &s, &[x, 0.4], 2).unwrap();
            let f = 2.0 + f64::cos(x);
            let (fp, fpp) = (-f64::sin(x), -f64::cos(x));
            let h2 = &mp.extrinsic().blocks[1];
            // H_2 = −(f'/f)∂x, frame component along E_1 = ∂x
            assert!((h2.mean[0].value() + fp / f).abs() < 1e-14);
            let q = mp.quadratic_invariants(1);
            assert!((q.hh - (fp / f).powi(2)).abs() < 1e-14);
            assert!((q.casorati[1 * 2 + 1] - (fp / f).powi(2)).abs() < 1e-14);
            assert_eq!(q.tt, 0.0);
            assert!((mp.mixed_scalar().total + fpp / f).abs() < 1e-13);
            assert!((mp.sigma_elementary(0, 1).unwrap() + fp / f).abs() < 1e-14);
            assert!(mp.sigma_elementary(0, 2).unwrap().abs() < 1e-300);
        }
    }

    #[test]
    fn sphere_partial_ricci_is_metric() {
        let g = diag(&["t", "f"], &["1", "sin(t)^2"]);
        let s = SplittingSpec::coordinate(&[1, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[1.0, 0.5], 2).unwrap();
        let r = mp.partial_ricci(0);
        assert!((r[1 * 2 + 1] - 1.0).abs() < 1e-12);
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
        assert!((mp.mixed_scalar().total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_symmetric_values() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2), 11.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 3), 6.0);
        assert_eq!(elementary_symmetric(&[0.5, 0.5], 2), 0.25);
    }
}

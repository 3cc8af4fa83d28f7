//! Contorsion tensors `𝕀 = ∇̄ − ∇` and the quantities built from them.
//!
//! Chart layout of a (1,2) tensor: `[(i*n + j)*n + k] = (𝕀_{∂i} ∂j)^k`.
//! Frame layout: `[(a*n + b)*n + c] = ⟨𝕀_{E_a} E_b, E_c⟩`.

use crate::error::{GeometryError, Result};
use crate::expr::Expr;
use crate::geometry::{PointGeometry, VectorFieldDef};
use crate::jet::Jet;
use crate::multiproduct::{values, Dist, MixedScalar, MultiPoint};

/// Tolerance for the full symmetry of a statistical cubic form.
pub const CUBIC_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum ContorsionKind {
    Zero,
    /// Lower-index cubic form `A_{ijk} = ⟨𝕀_{∂i}∂j, ∂k⟩`, `n³` entries.
    Statistical { cubic: Vec<Expr> },
    /// `𝕀_X Y = ⟨U, Y⟩X − ⟨X, Y⟩U`.
    SemiSymmetric { u: VectorFieldDef },
    /// Arbitrary components `(𝕀_{∂i}∂j)^k`, `n³` entries.
    General { components: Vec<Expr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contorsion {
    n: usize,
    kind: ContorsionKind,
}

impl Contorsion {
    pub fn zero(n: usize) -> Contorsion {
        Contorsion {
            n,
            kind: ContorsionKind::Zero,
        }
    }

    /// Rejects cubic forms that are not symmetric in all three slots.
    pub fn statistical(n: usize, cubic: Vec<Expr>) -> Result<Contorsion> {
        if cubic.len() != n * n * n {
            return Err(GeometryError::Invalid("cubic form needs n³ entries".into()));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = &cubic[(i * n + j) * n + k];
                    for (x, y, z) in [(j, i, k), (i, k, j), (k, j, i)] {
                        if &cubic[(x * n + y) * n + z] != a {
                            return Err(GeometryError::Invalid(format!(
                                "cubic form is not symmetric at ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Contorsion {
            n,
            kind: ContorsionKind::Statistical { cubic },
        })
    }

    /// Cubic form `Σ_r u_r θ_r ⊗ θ_r ⊗ θ_r` for covectors `θ_r` (chart components).
    pub fn statistical_from_terms(n: usize, terms: &[(Expr, Vec<Expr>)]) -> Result<Contorsion> {
        let mut cubic = vec![Expr::zero(); n * n * n];
        for (u, th) in terms {
            if th.len() != n {
                return Err(GeometryError::Invalid("covector has wrong length".into()));
            }
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let t = u.clone() * th[i].clone() * th[j].clone() * th[k].clone();
                        let slot = &mut cubic[(i * n + j) * n + k];
                        *slot = slot.clone() + t;
                    }
                }
            }
        }
        // products were built in slot order, so permuted slots print differently;
        // symmetrize structurally by copying from the sorted index
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = [i, j, k];
                    s.sort();
                    cubic[(i * n + j) * n + k] = cubic[(s[0] * n + s[1]) * n + s[2]].clone();
                }
            }
        }
        Contorsion::statistical(n, cubic)
    }

    pub fn semi_symmetric(u: VectorFieldDef) -> Contorsion {
        Contorsion {
            n: u.components.len(),
            kind: ContorsionKind::SemiSymmetric { u },
        }
    }

    pub fn general(n: usize, components: Vec<Expr>) -> Result<Contorsion> {
        if components.len() != n * n * n {
            return Err(GeometryError::Invalid("contorsion needs n³ components".into()));
        }
        Ok(Contorsion {
            n,
            kind: ContorsionKind::General { components },
        })
    }

    pub fn kind(&self) -> &ContorsionKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ContorsionKind::Zero => "zero",
            ContorsionKind::Statistical { .. } => "statistical",
            ContorsionKind::SemiSymmetric { .. } => "semi_symmetric",
            ContorsionKind::General { .. } => "general",
        }
    }

    /// Chart components as jets, with the metric data of `geo` used to raise
    /// or lower indices where the kind requires it.
    pub fn chart_jets(&self, geo: &PointGeometry) -> Result<Vec<Jet>> {
        let n = self.n;
        let p = geo.point();
        let order = geo.order();
        match &self.kind {
            ContorsionKind::Zero => Ok(vec![Jet::zero(n, order); n * n * n]),
            ContorsionKind::Statistical { cubic } => {
                let a: Vec<Jet> = cubic
                    .iter()
                    .map(|e| e.eval_jet(p, order))
                    .collect::<std::result::Result<_, _>>()?;
                let mut out = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        let low: Vec<Jet> = (0..n).map(|l| a[(i * n + j) * n + l].clone()).collect();
                        out.extend(geo.raise(&low));
                    }
                }
                Ok(out)
            }
            ContorsionKind::SemiSymmetric { u } => {
                let uj = u.jets(p, order)?;
                let ul = geo.lower(&uj);
                let mut out = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = geo.metric(i, j) * &uj[k];
                            v = -v;
                            if k == i {
                                v += &ul[j];
                            }
                            out.push(v);
                        }
                    }
                }
                Ok(out)
            }
            ContorsionKind::General { components } => Ok(components
                .iter()
                .map(|e| e.eval_jet(p, order))
                .collect::<std::result::Result<_, _>>()?),
        }
    }
}

/// Numerical symmetry defect of a statistical cubic form at a point.
pub fn cubic_symmetry_defect(c: &Contorsion, p: &[f64]) -> Result<f64> {
    let n = c.n;
    let ContorsionKind::Statistical { cubic } = &c.kind else {
        return Ok(0.0);
    };
    let v: Vec<f64> = cubic
        .iter()
        .map(|e| e.eval(p))
        .collect::<std::result::Result<_, _>>()?;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = v[(i * n + j) * n + k];
                worst = worst
                    .max((a - v[(j * n + i) * n + k]).abs())
                    .max((a - v[(i * n + k) * n + j]).abs());
            }
        }
    }
    Ok(worst)
}

/// `𝕀*`, `𝕀^∧`, `𝕀*^∧` and `Θ` in frame layout (values).
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateSet {
    pub star: Vec<f64>,
    pub wedge: Vec<f64>,
    pub star_wedge: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Partial traces of `𝕀` and `𝕀*` over a block and its complement
/// (covariant frame components).
#[derive(Clone, Debug, PartialEq)]
pub struct PartialTraces {
    pub tr_block: Vec<f64>,
    pub tr_perp: Vec<f64>,
    pub tr_block_star: Vec<f64>,
    pub tr_perp_star: Vec<f64>,
}

/// The contorsion evaluated against a splitting at one point.
pub struct ContorsionAt<'a> {
    pub mp: &'a MultiPoint,
    /// Frame layout, jets.
    pub frame: Vec<Jet>,
    pub chart: Vec<Jet>,
}

impl<'a> ContorsionAt<'a> {
    /// `chart` are contorsion jets in chart layout (e.g. from [`Contorsion::chart_jets`]).
    pub fn new(mp: &'a MultiPoint, chart: Vec<Jet>) -> ContorsionAt<'a> {
        let n = mp.dim();
        let geo = &mp.geo;
        let fv = &mp.frame.vectors;
        let mut frame = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                let v = crate::geometry::apply_12(&chart, n, &fv[a], &fv[b]);
                let low = geo.lower(&v);
                for c in 0..n {
                    let mut acc = Jet::zero(n, low[0].order());
                    for k in 0..n {
                        acc.add_product(&low[k], &fv[c][k]);
                    }
                    frame.push(acc);
                }
            }
        }
        ContorsionAt { mp, frame, chart }
    }

    pub fn for_contorsion(mp: &'a MultiPoint, c: &Contorsion) -> Result<ContorsionAt<'a>> {
        Ok(ContorsionAt::new(mp, c.chart_jets(&mp.geo)?))
    }

    fn n(&self) -> usize {
        self.mp.dim()
    }

    pub fn frame_values(&self) -> Vec<f64> {
        values(&self.frame)
    }

    pub fn conjugates(&self) -> ConjugateSet {
        let n = self.n();
        let v = self.frame_values();
        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut star = vec![0.0; n * n * n];
        let mut wedge = vec![0.0; n * n * n];
        let mut star_wedge = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    star[idx(a, b, c)] = v[idx(a, c, b)];
                    wedge[idx(a, b, c)] = v[idx(b, a, c)];
                    star_wedge[idx(a, b, c)] = v[idx(b, c, a)];
                }
            }
        }
        let theta = (0..n * n * n)
            .map(|k| v[k] - star[k] + wedge[k] - star_wedge[k])
            .collect();
        ConjugateSet {
            star,
            wedge,
            star_wedge,
            theta,
        }
    }

    /// `tr_S 𝕀 = Σ_{a ∈ S} ε_a 𝕀_{E_a}E_a` (jets); `star` selects `𝕀*`.
    pub fn trace(&self, mask: &[bool], star: bool) -> Vec<Jet> {
        let n = self.n();
        let order = self.frame[0].order();
        let mut out = vec![Jet::zero(n, order); n];
        for a in (0..n).filter(|&a| mask[a]) {
            let e = self.mp.eps(a);
            for c in 0..n {
                // ⟨𝕀*_{E_a}E_a, E_c⟩ = ⟨𝕀_{E_a}E_c, E_a⟩
                let x = if star {
                    &self.frame[(a * n + c) * n + a]
                } else {
                    &self.frame[(a * n + a) * n + c]
                };
                out[c] += &x.scale(e);
            }
        }
        out
    }

    pub fn partial_traces(&self, i: usize) -> PartialTraces {
        let m = self.mp.mask(&Dist::Block(i));
        let mp: Vec<bool> = m.iter().map(|x| !x).collect();
        PartialTraces {
            tr_block: values(&self.trace(&m, false)),
            tr_perp: values(&self.trace(&mp, false)),
            tr_block_star: values(&self.trace(&m, true)),
            tr_perp_star: values(&self.trace(&mp, true)),
        }
    }

    /// `⟨𝕀*, 𝕀^∧⟩` restricted to `V(S) = S×S^c ∪ S^c×S`.
    pub fn star_wedge_restricted(&self, mask: &[bool]) -> f64 {
        let n = self.n();
        let v = self.frame_values();
        let c = self.conjugates();
        let e = &self.mp.frame.eps;
        let mut s = 0.0;
        for a in (0..n).filter(|&a| mask[a]) {
            for b in (0..n).filter(|&b| !mask[b]) {
                let mut t = 0.0;
                for d in 0..n {
                    t += e[d]
                        * (v[(a * n + b) * n + d] * c.star[(b * n + a) * n + d]
                            + c.star[(a * n + b) * n + d] * v[(b * n + a) * n + d]);
                }
                s += e[a] * e[b] * t;
            }
        }
        s
    }

    /// `⟨𝕀, 𝕀⟩` restricted to `V(S)`.
    pub fn norm_restricted(&self, mask: &[bool]) -> f64 {
        let n = self.n();
        let v = self.frame_values();
        let e = &self.mp.frame.eps;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                if mask[a] == mask[b] {
                    continue;
                }
                for d in 0..n {
                    let x = v[(a * n + b) * n + d];
                    s += e[a] * e[b] * e[d] * x * x;
                }
            }
        }
        s
    }

    /// `Q̄(D, g, 𝕀)` for the side `D = S`, from the general definition.
    pub fn bar_q_side(&self, mask: &[bool]) -> f64 {
        let n = self.n();
        let mp = self.mp;
        let comp: Vec<bool> = mask.iter().map(|x| !x).collect();
        let v = self.frame_values();
        let conj = self.conjugates();
        let e = &mp.frame.eps;
        let tr_s = values(&self.trace(mask, false));
        let tr_c = values(&self.trace(&comp, false));
        let tr_s_star = values(&self.trace(mask, true));
        let tr_c_star = values(&self.trace(&comp, true));
        let side = mp.side_tensors(mask);
        let other = mp.side_tensors(&comp);
        let h = values(&side.mean);
        let hp = values(&other.mean);
        let (hs, ts) = (values(&side.h), values(&side.t));
        let (ho, to) = (values(&other.h), values(&other.t));

        let mut two_q = mp.dot(&tr_s, &tr_c_star) + mp.dot(&tr_c, &tr_s_star)
            - self.star_wedge_restricted(mask);
        let diff: Vec<f64> = (0..n)
            .map(|c| (tr_s[c] - tr_s_star[c]) - (tr_c[c] - tr_c_star[c]))
            .collect();
        let hdiff: Vec<f64> = (0..n).map(|c| h[c] - hp[c]).collect();
        two_q += mp.dot(&diff, &hdiff);

        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut theta_term = 0.0;
        for a in (0..n).filter(|&a| mask[a]) {
            for b in (0..n).filter(|&b| !mask[b]) {
                let mut t = 0.0;
                for d in 0..n {
                    let vd = v[idx(b, a, d)] - conj.star[idx(b, a, d)] + v[idx(a, b, d)]
                        - conj.star[idx(a, b, d)];
                    let wd = if mask[d] {
                        hs[idx(a, d, b)] - ts[idx(a, d, b)]
                    } else {
                        ho[idx(b, d, a)] - to[idx(b, d, a)]
                    };
                    t += e[d] * vd * wd;
                }
                theta_term += e[a] * e[b] * t;
            }
        }
        two_q += theta_term;
        0.5 * two_q
    }

    pub fn bar_q(&self, i: usize) -> f64 {
        self.bar_q_side(&self.mp.mask(&Dist::Block(i)))
    }

    /// `½ (P(tr_{S^c}(𝕀 − 𝕀*)) + P^⊥(tr_S(𝕀 − 𝕀*)))` as covariant frame jets.
    pub fn bar_q_divergence_field(&self, mask: &[bool]) -> Vec<Jet> {
        let n = self.n();
        let comp: Vec<bool> = mask.iter().map(|x| !x).collect();
        let ts = self.trace(mask, false);
        let tss = self.trace(mask, true);
        let tc = self.trace(&comp, false);
        let tcs = self.trace(&comp, true);
        (0..n)
            .map(|c| {
                let d = if mask[c] { &tc[c] - &tcs[c] } else { &ts[c] - &tss[c] };
                d.scale(0.5)
            })
            .collect()
    }

    /// Curvature of `∇̄`, framed: `⟨R̄_{E_a,E_b}E_c, E_d⟩`.
    pub fn bar_frame_curvature(&self) -> Vec<f64> {
        let r: Vec<f64> = self.mp.geo.bar_riemann(&self.chart).iter().map(Jet::value).collect();
        self.mp.frame_13(&r)
    }

    pub fn bar_mixed_scalar(&self) -> MixedScalar {
        self.mp.mixed_scalar_from(&self.bar_frame_curvature())
    }

    /// `𝕀_X Y = 0` whenever `X`, `Y` lie in different blocks.
    pub fn adapted_defect(&self) -> f64 {
        let n = self.n();
        let v = self.frame_values();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if self.mp.frame.block_of(a) == self.mp.frame.block_of(b) {
                    continue;
                }
                for c in 0..n {
                    worst = worst.max(v[(a * n + b) * n + c].abs());
                }
            }
        }
        worst
    }

    /// Largest entry of `𝕀* + 𝕀` (zero for metric connections).
    pub fn metric_defect(&self) -> f64 {
        let v = self.frame_values();
        let c = self.conjugates();
        v.iter().zip(&c.star).fold(0.0, |m, (x, y)| m.max((x + y).abs()))
    }

    /// Largest entry of `𝕀 − 𝕀*` and `𝕀 − 𝕀^∧` (zero for statistical connections).
    pub fn statistical_defect(&self) -> f64 {
        let v = self.frame_values();
        let c = self.conjugates();
        v.iter()
            .zip(c.star.iter().zip(&c.wedge))
            .fold(0.0, |m, (x, (s, w))| m.max((x - s).abs()).max((x - w).abs()))
    }
}

/// Closed form of `Q̄(D_i)` for a semi-symmetric contorsion with vector `U`
/// given by covariant frame components:
/// `−Q̄ = (n^⊥ − n)⟨U, H^⊥ − H⟩ + n n^⊥|U|² − n^⊥|P U|² − n|P^⊥ U|²`.
pub fn semi_symmetric_bar_q(mp: &MultiPoint, i: usize, u: &[f64]) -> f64 {
    let n = mp.dim();
    let mask = mp.mask(&Dist::Block(i));
    let ni = mask.iter().filter(|&&m| m).count() as f64;
    let np = n as f64 - ni;
    let ex = mp.extrinsic();
    let h = values(&ex.blocks[i].mean);
    let hp = values(&ex.perps[i].mean);
    let pu: Vec<f64> = (0..n).map(|c| if mask[c] { u[c] } else { 0.0 }).collect();
    let ppu: Vec<f64> = (0..n).map(|c| if mask[c] { 0.0 } else { u[c] }).collect();
    let hd: Vec<f64> = (0..n).map(|c| hp[c] - h[c]).collect();
    let minus_q = (np - ni) * mp.dot(u, &hd) + ni * np * mp.dot(u, u)
        - np * mp.dot(&pu, &pu)
        - ni * mp.dot(&ppu, &ppu);
    -minus_q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::geometry::MetricField;
    use crate::multiproduct::SplittingSpec;

    fn flat(n: usize) -> MetricField {
        let coords: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        MetricField::diagonal(coords, vec![Expr::one(); n]).unwrap()
    }

    #[test]
    fn semi_symmetric_components() {
        let g = flat(2);
        let u = VectorFieldDef::coordinate(2, 0);
        let c = Contorsion::semi_symmetric(u);
        let geo = g.at(&[0.1, 0.2], 1).unwrap();
        let j = c.chart_jets(&geo).unwrap();
        let at = |i: usize, jj: usize, k: usize| j[(i * 2 + jj) * 2 + k].value();
        // 𝕀_{∂y}∂y = −∂x, 𝕀_{∂x}∂y = 0
        assert_eq!((at(1, 1, 0), at(1, 1, 1)), (-1.0, 0.0));
        assert_eq!((at(0, 1, 0), at(0, 1, 1)), (0.0, 0.0));
    }

    #[test]
    fn asymmetric_cubic_rejected() {
        let mut cubic = vec![Expr::zero(); 8];
        cubic[1] = Expr::one();
        assert!(Contorsion::statistical(2, cubic).is_err());
    }

    #[test]
    fn zero_contorsion_classifies_both_ways() {
        let g = flat(3);
        let s = SplittingSpec::coordinate(&[1, 1, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.0; 3], 2).unwrap();
        let ca = ContorsionAt::for_contorsion(&mp, &Contorsion::zero(3)).unwrap();
        assert_eq!(ca.metric_defect(), 0.0);
        assert_eq!(ca.statistical_defect(), 0.0);
        assert_eq!(ca.bar_q(0), 0.0);
    }

    #[test]
    fn statistical_rank_one_conjugates() {
        let coords = ["x", "y", "z"];
        let g = MetricField::diagonal(
            coords.iter().map(|s| s.to_string()).collect(),
            vec![
                Expr::one(),
                parse_expression("(2+cos(x))^2", &coords).unwrap(),
                Expr::one(),
            ],
        )
        .unwrap();
        let u = parse_expression("sin(x)+0.5", &coords).unwrap();
        let th = vec![Expr::one(), Expr::constant(0.3), Expr::zero()];
        let c = Contorsion::statistical_from_terms(3, &[(u, th)]).unwrap();
        let s = SplittingSpec::coordinate(&[1, 1, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.4, 0.1, 0.2], 2).unwrap();
        let ca = ContorsionAt::for_contorsion(&mp, &c).unwrap();
        assert!(ca.statistical_defect() < 1e-12);
        let conj = ca.conjugates();
        assert!(conj.theta.iter().all(|x| x.abs() < 1e-12));
    }

    fn cubic_on(n: usize, keep: impl Fn(usize, usize, usize) -> bool) -> Contorsion {
        let coords: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let c: Vec<&str> = coords.iter().map(String::as_str).collect();
        let mut out = vec![Expr::zero(); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    if keep(a, b, d) {
                        let s = format!("0.2*sin(x{})+0.1*{}", (a + b + d) % n, a + b + d + 1);
                        out[(a * n + b) * n + d] = parse_expression(&s, &c).unwrap();
                    }
                }
            }
        }
        Contorsion::statistical(n, out).unwrap()
    }

    #[test]
    fn adapted_only_for_block_diagonal_cubic() {
        let g = flat(3);
        let s = SplittingSpec::coordinate(&[1, 2]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.3, 0.7, 1.1], 2).unwrap();
        let block = |a: usize| usize::from(a > 0);
        let adapted = cubic_on(3, |a, b, d| block(a) == block(b) && block(b) == block(d));
        let ca = ContorsionAt::for_contorsion(&mp, &adapted).unwrap();
        assert!(ca.adapted_defect() < 1e-14);
        assert!(ca.statistical_defect() < 1e-14);
        let mixed = cubic_on(3, |_, _, _| true);
        assert!(ContorsionAt::for_contorsion(&mp, &mixed).unwrap().adapted_defect() > 1e-3);
    }

    #[test]
    fn partial_traces_sum_to_full_trace() {
        let g = flat(4);
        let s = SplittingSpec::coordinate(&[1, 2, 1]).unwrap();
        let mp = MultiPoint::at(&g, &s, &[0.3, 0.7, 1.1, 2.0], 2).unwrap();
        let c = cubic_on(4, |_, _, _| true);
        let ca = ContorsionAt::for_contorsion(&mp, &c).unwrap();
        let full = values(&ca.trace(&[true; 4], false));
        for i in 0..3 {
            let t = ca.partial_traces(i);
            for a in 0..4 {
                assert!((t.tr_block[a] + t.tr_perp[a] - full[a]).abs() < 1e-14);
                // symmetric cubic form: 𝕀 and 𝕀* coincide
                assert!((t.tr_block[a] - t.tr_block_star[a]).abs() < 1e-14);
            }
        }
    }
}

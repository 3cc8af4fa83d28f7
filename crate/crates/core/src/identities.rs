//! Pointwise identities of the extrinsic geometry, evaluated as residuals.

use serde::Serialize;

use crate::connections::{semi_symmetric_bar_q, Contorsion, ContorsionAt, ContorsionKind};
use crate::error::Result;
use crate::jet::Jet;
use crate::models::ModelSpec;
use crate::multiproduct::{values, Dist, MultiPoint};

/// Maximum residual of one identity over a set of points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    pub residual: f64,
    pub points: usize,
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

struct Acc(Vec<(String, f64)>);

impl Acc {
    fn push(&mut self, name: &str, r: f64) {
        match self.0.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(r),
            None => self.0.push((name.to_string(), r)),
        }
    }
}

/// Divergence, partial Ricci and contorsion identities at one point.
fn structural(mp: &MultiPoint, c: &Contorsion, acc: &mut Acc) -> Result<()> {
    let n = mp.dim();
    let ms = mp.mixed_scalar();
    let ex = mp.extrinsic();
    let mut total_div = 0.0;
    let mut sum_q = 0.0;
    for i in 0..mp.k() {
        let v: Vec<Jet> = (0..n).map(|c| &ex.blocks[i].mean[c] + &ex.perps[i].mean[c]).collect();
        let d = mp.div_frame(&v).value();
        let q = mp.q_function(i);
        acc.push("block divergence formula", rel(d, ms.per_block[i] - q));
        total_div += d;
        sum_q += q;
    }
    acc.push("mixed scalar divergence formula", rel(total_div, 2.0 * ms.total - sum_q));

    for i in 0..mp.k() {
        let (s, sp) = (&ex.blocks[i], &ex.perps[i]);
        let q = mp.quadratic_invariants(i);
        let sides = [
            (mp.partial_ricci(i), sp, s, &q.casorati_perp, &q.twist_perp, &q.psi),
            (mp.partial_ricci_dual(i), s, sp, &q.casorati, &q.twist, &q.psi_perp),
        ];
        for (r, side, other, cas, tw, psi) in sides {
            let divh = mp.div_12_frame(&side.h);
            let hv = values(&side.h);
            let mv = values(&side.mean);
            let def = mp.deformation(&mp.to_chart(&other.mean), &side.mask);
            for a in (0..n).filter(|&a| side.mask[a]) {
                for b in (0..n).filter(|&b| side.mask[b]) {
                    let hh: f64 = (0..n).map(|e| mp.eps(e) * hv[(a * n + b) * n + e] * mv[e]).sum();
                    let rhs = divh[a * n + b] + hh - cas[a * n + b] - tw[a * n + b] - psi[a * n + b]
                        + def[a * n + b];
                    acc.push("partial Ricci decomposition", rel(r[a * n + b], rhs));
                }
            }
        }
    }

    let ca = ContorsionAt::for_contorsion(mp, c)?;
    let bar = ca.bar_mixed_scalar();
    let mut field = vec![Jet::zero(n, 2); n];
    let mut rhs = 2.0 * bar.total;
    for i in 0..mp.k() {
        let mask = mp.mask(&Dist::Block(i));
        let f = ca.bar_q_divergence_field(&mask);
        let bq = ca.bar_q(i);
        let d = mp.div_frame(&f).value();
        acc.push("contorted block divergence formula", rel(d, bar.per_block[i] - ms.per_block[i] - bq));
        for c in 0..n {
            field[c] += &f[c];
            field[c] += &ex.blocks[i].mean[c];
            field[c] += &ex.perps[i].mean[c];
        }
        rhs -= bq + mp.q_function(i);
    }
    acc.push("contorted mixed scalar divergence formula", rel(mp.div_frame(&field).value(), rhs));

    match c.kind() {
        ContorsionKind::Statistical { .. } => {
            for i in 0..mp.k() {
                let t = ca.partial_traces(i);
                let mask = mp.mask(&Dist::Block(i));
                let reduced = mp.dot(&t.tr_block, &t.tr_perp) - 0.5 * ca.norm_restricted(&mask);
                acc.push("statistical reduction of contorted Q", rel(ca.bar_q(i), reduced));
            }
        }
        ContorsionKind::SemiSymmetric { u } => {
            let uf = values(&mp.to_frame(&u.jets(mp.geo.point(), 1)?));
            for i in 0..mp.k() {
                acc.push("semi-symmetric reduction of contorted Q", rel(ca.bar_q(i), semi_symmetric_bar_q(mp, i, &uf)));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Trace identities linking the quadratic invariants to norms of `h`, `T`, `H`.
fn traces(mp: &MultiPoint, acc: &mut Acc) {
    let ex = mp.extrinsic();
    for i in 0..mp.k() {
        let (s, sp) = (&ex.blocks[i], &ex.perps[i]);
        let q = mp.quadratic_invariants(i);
        let bm = Some(s.mask.as_slice());
        let pm = Some(sp.mask.as_slice());
        acc.push("trace of Casorati tensor", rel(mp.trace02(&q.casorati, bm), q.hh));
        acc.push("trace of twist tensor", rel(mp.trace02(&q.twist, bm), -q.tt));
        acc.push("trace of dual Psi tensor", rel(mp.trace02(&q.psi_perp, bm), q.hh_perp - q.tt_perp));
        acc.push("trace of Psi tensor", rel(mp.trace02(&q.psi, pm), q.hh - q.tt));
        let divh = mp.div_12_frame(&s.h);
        acc.push("trace of divergence of h", rel(mp.trace02(&divh, bm), mp.div_frame(&s.mean).value()));
        let def = mp.deformation(&mp.to_chart(&sp.mean), &s.mask);
        let mpv = values(&sp.mean);
        let want = mp.div_frame(&sp.mean).value() + mp.dot(&mpv, &mpv);
        acc.push("trace of deformation tensor", rel(mp.trace02(&def, bm), want));
    }
}

/// Which residual families to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentitySuite {
    Structural,
    Traces,
}

/// Maximum residual of each identity of `suite` over the points.
pub fn identity_residuals(model: &ModelSpec, points: &[Vec<f64>], suite: IdentitySuite) -> Result<Vec<IdentityResidual>> {
    let mut acc = Acc(Vec::new());
    for p in points {
        let mp = model.at(p, 3)?;
        match suite {
            IdentitySuite::Structural => structural(&mp, &model.contorsion, &mut acc)?,
            IdentitySuite::Traces => traces(&mp, &mut acc),
        }
    }
    Ok(acc
        .0
        .into_iter()
        .map(|(name, residual)| IdentityResidual { name, residual, points: points.len() })
        .collect())
}

//! Built-in model manifolds with known closed-form geometry.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connections::Contorsion;
use crate::error::{GeometryError, Result};
use crate::expr::{parse_expression, Expr};
use crate::geometry::{MetricField, VectorFieldDef};
use crate::multiproduct::{MultiPoint, SplittingSpec};

/// Distance from a pole (in `sin θ`) below which sphere charts refuse to evaluate.
pub const POLE_GUARD: f64 = 1e-3;

/// Number of samples per coordinate when checking warping functions for positivity.
const POSITIVITY_SAMPLES: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Flat,
    /// Flat base of dimension `base_dim`, 1-dimensional fibers with factors `u`.
    MultiplyWarped { base_dim: usize, u: Vec<Expr> },
    /// As above, with `u_i` allowed to depend on the coordinate of fiber `i`.
    MultiplyTwisted { base_dim: usize, u: Vec<Expr> },
    Sphere { radius: f64 },
    /// Non-integrable rotating splitting of a 4-torus.
    Helical { lorentzian: bool },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub metric: MetricField,
    pub splitting: SplittingSpec,
    pub contorsion: Contorsion,
    pub family: Family,
    /// Closed manifold (a torus with the box below as fundamental domain).
    pub closed: bool,
    /// Coordinate box: the period box for tori, the chart domain otherwise.
    pub domain: Vec<(f64, f64)>,
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn torus_box(n: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 2.0 * PI); n]
}

/// Checks `u > 0` on a sample grid over the coordinates it uses.
fn check_positive(u: &Expr, n: usize, label: &str) -> Result<()> {
    let used = u.coords_used();
    let total = POSITIVITY_SAMPLES.pow(used.len() as u32);
    let mut p = vec![0.0; n];
    for idx in 0..total {
        let mut r = idx;
        for &c in &used {
            p[c] = 2.0 * PI * (r % POSITIVITY_SAMPLES) as f64 / POSITIVITY_SAMPLES as f64;
            r /= POSITIVITY_SAMPLES;
        }
        let v = u.eval(&p)?;
        if !(v > 0.0) {
            return Err(GeometryError::Invalid(format!(
                "{label} is not positive at {p:?} (value {v})"
            )));
        }
    }
    Ok(())
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn with_contorsion(mut self, c: Contorsion) -> Result<ModelSpec> {
        if c.dim() != self.dim() {
            return Err(GeometryError::Invalid("contorsion dimension mismatch".into()));
        }
        self.contorsion = c;
        Ok(self)
    }

    /// Identity metric with coordinate blocks of the given sizes.
    pub fn flat_torus(partition: &[usize]) -> Result<ModelSpec> {
        let splitting = SplittingSpec::coordinate(partition)?;
        let n = splitting.dim();
        Ok(ModelSpec {
            name: format!("flat_torus{partition:?}"),
            metric: MetricField::diagonal(names(n), vec![Expr::one(); n])?,
            splitting,
            contorsion: Contorsion::zero(n),
            family: Family::Flat,
            closed: true,
            domain: torus_box(n),
        })
    }

    /// `dx_0² + … + dx_{m−1}² + Σ u_i² dy_i²` with `u_i` functions of the base.
    pub fn multiply_warped_torus(base_dim: usize, u: Vec<Expr>) -> Result<ModelSpec> {
        let n = base_dim + u.len();
        for (i, ui) in u.iter().enumerate() {
            if ui.coords_used().iter().any(|&c| c >= base_dim) {
                return Err(GeometryError::Invalid(format!(
                    "warping function {} depends on a fiber coordinate",
                    i + 1
                )));
            }
        }
        let mut m = Self::twisted_like(base_dim, &u)?;
        m.name = format!("multiply_warped_torus(m={base_dim}, k={})", u.len() + 1);
        m.family = Family::MultiplyWarped { base_dim, u };
        debug_assert_eq!(m.dim(), n);
        Ok(m)
    }

    /// As [`ModelSpec::multiply_warped_torus`] but `u_i` may also depend on `y_i`.
    pub fn multiply_twisted_torus(base_dim: usize, u: Vec<Expr>) -> Result<ModelSpec> {
        for (i, ui) in u.iter().enumerate() {
            let own = base_dim + i;
            if ui.coords_used().iter().any(|&c| c >= base_dim && c != own) {
                return Err(GeometryError::Invalid(format!(
                    "twisting function {} depends on another fiber's coordinate",
                    i + 1
                )));
            }
        }
        let mut m = Self::twisted_like(base_dim, &u)?;
        m.name = format!("multiply_twisted_torus(m={base_dim}, k={})", u.len() + 1);
        m.family = Family::MultiplyTwisted { base_dim, u };
        Ok(m)
    }

    fn twisted_like(base_dim: usize, u: &[Expr]) -> Result<ModelSpec> {
        if base_dim == 0 || u.is_empty() {
            return Err(GeometryError::Invalid("need a base and at least one fiber".into()));
        }
        let n = base_dim + u.len();
        let mut diag = vec![Expr::one(); base_dim];
        for (i, ui) in u.iter().enumerate() {
            check_positive(ui, n, &format!("u_{}", i + 1))?;
            diag.push(ui.clone() * ui.clone());
        }
        let mut partition = vec![base_dim];
        partition.extend(std::iter::repeat(1).take(u.len()));
        Ok(ModelSpec {
            name: String::new(),
            metric: MetricField::diagonal(names(n), diag)?,
            splitting: SplittingSpec::coordinate(&partition)?,
            contorsion: Contorsion::zero(n),
            family: Family::Custom,
            closed: true,
            domain: torus_box(n),
        })
    }

    /// Round metric `r²(dθ² + sin²θ dφ²)` on a polar chart; not closed.
    pub fn sphere_chart(radius: f64) -> Result<ModelSpec> {
        if !(radius > 0.0) {
            return Err(GeometryError::Invalid("radius must be positive".into()));
        }
        let c = ["theta", "phi"];
        let r2 = Expr::constant(radius * radius);
        let s = parse_expression("sin(theta)^2", &c)?;
        Ok(ModelSpec {
            name: format!("sphere_chart(r={radius})"),
            metric: MetricField::diagonal(
                c.iter().map(|s| s.to_string()).collect(),
                vec![r2.clone(), r2 * s],
            )?,
            splitting: SplittingSpec::coordinate(&[1, 1])?,
            contorsion: Contorsion::zero(2),
            family: Family::Sphere { radius },
            closed: false,
            domain: vec![(0.3, PI - 0.3), (0.0, 2.0 * PI)],
        })
    }

    /// `dx² + a²(dy² + dz²) ± b² dw²` on a 4-torus, split as
    /// `span{∂x, cos x ∂y + sin x ∂z} ⊕ span{−sin x ∂y + cos x ∂z} ⊕ span{∂w}`.
    /// The first block is not integrable; the last one is timelike when `lorentzian`.
    pub fn helical(lorentzian: bool) -> Result<ModelSpec> {
        let c = ["x", "y", "z", "w"];
        let p = |s: &str| parse_expression(s, &c);
        let a2 = p("(2+0.5*cos(x)+0.3*sin(w))^2")?;
        let mut b2 = p("(1.5+0.4*sin(x+y))^2")?;
        if lorentzian {
            b2 = -b2;
        }
        let mut metric = MetricField::diagonal(
            c.iter().map(|s| s.to_string()).collect(),
            vec![Expr::one(), a2.clone(), a2, b2],
        )?;
        if lorentzian {
            metric = metric.with_signature(vec![1, 1, 1, -1])?;
        }
        let v = |xs: [&str; 4]| -> Result<VectorFieldDef> {
            Ok(VectorFieldDef::new(
                xs.iter().map(|s| p(s)).collect::<std::result::Result<_, _>>()?,
            ))
        };
        let splitting = SplittingSpec::new(
            4,
            vec![
                vec![v(["1", "0", "0", "0"])?, v(["0", "cos(x)", "sin(x)", "0"])?],
                vec![v(["0", "-sin(x)", "cos(x)", "0"])?],
                vec![v(["0", "0", "0", "1"])?],
            ],
        )?;
        Ok(ModelSpec {
            name: format!("helical(lorentzian={lorentzian})"),
            metric,
            splitting,
            contorsion: Contorsion::zero(4),
            family: Family::Helical { lorentzian },
            closed: true,
            domain: torus_box(4),
        })
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeometryError::Invalid("point has wrong dimension".into()));
        }
        if let Family::Sphere { .. } = self.family {
            if p[0].sin().abs() < POLE_GUARD {
                return Err(GeometryError::Invalid(format!(
                    "point {p:?} is too close to a pole of the polar chart"
                )));
            }
        }
        Ok(())
    }

    /// Pointwise multi-product data, metric expanded to `order`.
    pub fn at(&self, p: &[f64], order: usize) -> Result<MultiPoint> {
        self.check_point(p)?;
        MultiPoint::at(&self.metric, &self.splitting, p, order)
    }

    /// Uniform random points in the coordinate box, reproducible from `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.domain.iter().map(|&(a, b)| rng.gen_range(a..b)).collect())
            .collect()
    }

    fn fibers(&self) -> Option<(usize, &[Expr])> {
        match &self.family {
            Family::MultiplyWarped { base_dim, u } | Family::MultiplyTwisted { base_dim, u } => {
                Some((*base_dim, u))
            }
            _ => None,
        }
    }

    /// Mixed scalar curvature from the closed form of the family, when one is known.
    ///
    /// Twisted and warped tori: `−Σ_i Δ_0 u_i / u_i − Σ_{i<j} ⟨∇_0 u_i, ∇_0 u_j⟩ / (u_i u_j)`,
    /// with derivatives along the flat base only. Spheres: `1/r²`.
    pub fn known_mixed_scalar(&self, p: &[f64]) -> Result<Option<f64>> {
        if let Family::Flat = self.family {
            return Ok(Some(0.0));
        }
        if let Family::Sphere { radius } = self.family {
            return Ok(Some(1.0 / (radius * radius)));
        }
        let Some((m, u)) = self.fibers() else {
            return Ok(None);
        };
        let jets = u
            .iter()
            .map(|e| e.eval_jet(p, 2))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let grad = |j: &crate::jet::Jet| -> Vec<f64> {
            (0..m).map(|a| j.derivative(a).value()).collect()
        };
        let mut s = 0.0;
        for j in &jets {
            let lap: f64 = (0..m).map(|a| j.derivative(a).derivative(a).value()).sum();
            s -= lap / j.value();
        }
        for i in 0..jets.len() {
            for k in i + 1..jets.len() {
                let (gi, gk) = (grad(&jets[i]), grad(&jets[k]));
                let dot: f64 = gi.iter().zip(&gk).map(|(a, b)| a * b).sum();
                s -= dot / (jets[i].value() * jets[k].value());
            }
        }
        Ok(Some(s))
    }

    /// Chart components of the mean curvature vector of a fiber block
    /// (`−∇_0 log u_i`), when known. Block 0 (the base) is totally geodesic.
    pub fn known_mean_curvature(&self, block: usize, p: &[f64]) -> Result<Option<Vec<f64>>> {
        let n = self.dim();
        if let Family::Flat = self.family {
            return Ok(Some(vec![0.0; n]));
        }
        let Some((m, u)) = self.fibers() else {
            return Ok(None);
        };
        let mut out = vec![0.0; n];
        if block == 0 {
            return Ok(Some(out));
        }
        let j = u[block - 1].eval_jet(p, 1)?;
        for a in 0..m {
            out[a] = -j.derivative(a).value() / j.value();
        }
        Ok(Some(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str, n: usize) -> Expr {
        let names = names(n);
        let c: Vec<&str> = names.iter().map(String::as_str).collect();
        parse_expression(s, &c).unwrap()
    }

    #[test]
    fn warped_rejects_fiber_dependence() {
        assert!(ModelSpec::multiply_warped_torus(1, vec![e("2+cos(x1)", 2)]).is_err());
        assert!(ModelSpec::multiply_twisted_torus(1, vec![e("2+cos(x0)*cos(x1)", 2)]).is_ok());
        assert!(ModelSpec::multiply_twisted_torus(1, vec![e("2", 3), e("2+cos(x1)", 3)]).is_err());
    }

    #[test]
    fn non_positive_factor_rejected() {
        let err = ModelSpec::multiply_warped_torus(1, vec![e("cos(x0)", 2)]);
        assert!(err.is_err());
    }

    #[test]
    fn sphere_pole_guard() {
        let s = ModelSpec::sphere_chart(1.0).unwrap();
        assert!(s.at(&[1e-5, 0.3], 2).is_err());
        assert!(s.at(&[1.0, 0.3], 2).is_ok());
        assert!(!s.closed);
    }

    #[test]
    fn samples_are_reproducible() {
        let m = ModelSpec::flat_torus(&[1, 2]).unwrap();
        assert_eq!(m.sample_points(5, 7), m.sample_points(5, 7));
        assert_ne!(m.sample_points(5, 7), m.sample_points(5, 8));
    }
}

//! Truncated multivariate Taylor polynomials ("jets") through third order.
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth scalar around a base
//! point `p`, i.e. `f(p + h) = Σ_α c_α h^α` for all multi-indices with
//! `|α| ≤ order`. Arithmetic is exact polynomial arithmetic followed by
//! truncation, so derivatives carry no truncation error. Differentiating a jet
//! lowers its order by one, which is how Christoffel symbols, curvature and
//! divergences are obtained from the metric without finite differences.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Highest supported differentiation order.
pub const MAX_ORDER: usize = 3;
/// Highest supported chart dimension.
pub const MAX_DIM: usize = 8;

/// Monomial bookkeeping shared by every jet of a given dimension.
pub struct Basis {
    n: usize,
    monomials: Vec<Vec<u8>>,
    /// `prefix[k]` = number of monomials of total degree ≤ k.
    prefix: [usize; MAX_ORDER + 1],
    /// For each monomial `i`: pairs `(j, k)` with `α_i + α_j = α_k`.
    mul: Vec<Vec<(u16, u16)>>,
    /// For each variable `v` and monomial `i` of degree < MAX_ORDER:
    /// `(index of α_i + e_v, α_v + 1)`.
    shift: Vec<Vec<(u16, f64)>>,
}

impl Basis {
    fn build(n: usize) -> Basis {
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut prefix = [0usize; MAX_ORDER + 1];
        for deg in 0..=MAX_ORDER {
            let mut level = Vec::new();
            enumerate(n, deg, &mut vec![0u8; n], 0, &mut level);
            monomials.extend(level);
            prefix[deg] = monomials.len();
        }
        let find = |alpha: &[u8]| monomials.iter().position(|m| m.as_slice() == alpha);
        let mut mul = Vec::with_capacity(monomials.len());
        for a in &monomials {
            let mut row = Vec::new();
            for (j, b) in monomials.iter().enumerate() {
                let deg: usize = a.iter().chain(b.iter()).map(|&x| x as usize).sum();
                if deg > MAX_ORDER {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                row.push((j as u16, find(&sum).expect("monomial present") as u16));
            }
            mul.push(row);
        }
        let mut shift = Vec::with_capacity(n);
        for v in 0..n {
            let mut row = Vec::with_capacity(prefix[MAX_ORDER - 1]);
            for a in &monomials[..prefix[MAX_ORDER - 1]] {
                let mut up = a.clone();
                up[v] += 1;
                row.push((find(&up).expect("monomial present") as u16, up[v] as f64));
            }
            shift.push(row);
        }
        Basis {
            n,
            monomials,
            prefix,
            mul,
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn len(&self, order: usize) -> usize {
        self.prefix[order]
    }

    fn index_of(&self, alpha: &[u8]) -> usize {
        self.monomials
            .iter()
            .position(|m| m.as_slice() == alpha)
            .expect("multi-index within basis")
    }

    /// Shared basis for an `n`-dimensional chart.
    pub fn get(n: usize) -> &'static Basis {
        static CACHE: OnceLock<Vec<Basis>> = OnceLock::new();
        assert!((1..=MAX_DIM).contains(&n), "jet dimension {n} out of range");
        &CACHE.get_or_init(|| (1..=MAX_DIM).map(Basis::build).collect())[n - 1]
    }
}

fn enumerate(n: usize, remaining: usize, cur: &mut Vec<u8>, pos: usize, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == n {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k as u8;
        enumerate(n, remaining - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

/// Truncated Taylor polynomial in `n` chart variables.
#[derive(Clone)]
pub struct Jet {
    basis: &'static Basis,
    order: u8,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("c", &self.c)
            .finish()
    }
}

impl Jet {
    pub fn constant(n: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER);
        let basis = Basis::get(n);
        let mut c = vec![0.0; basis.len(order)];
        c[0] = value;
        Jet {
            basis,
            order: order as u8,
            c,
        }
    }

    pub fn zero(n: usize, order: usize) -> Jet {
        Jet::constant(n, order, 0.0)
    }

    /// The coordinate function `x_var`, expanded around `value`.
    pub fn variable(n: usize, order: usize, var: usize, value: f64) -> Jet {
        let mut j = Jet::constant(n, order, value);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.basis.n
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        Jet {
            basis: self.basis,
            order: order as u8,
            c: self.c[..self.basis.len(order)].to_vec(),
        }
    }

    /// Partial derivative with respect to chart variable `var`; order drops by one.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order() - 1;
        let len = self.basis.len(order);
        let shift = &self.basis.shift[var];
        let c = (0..len)
            .map(|i| {
                let (k, f) = shift[i];
                f * self.c[k as usize]
            })
            .collect();
        Jet {
            basis: self.basis,
            order: order as u8,
            c,
        }
    }

    /// Coefficient of the monomial `h^alpha`.
    pub fn coefficient(&self, alpha: &[u8]) -> f64 {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > self.order() {
            return 0.0;
        }
        self.c[self.basis.index_of(alpha)]
    }

    /// Mixed partial derivative `∂^alpha f(p)`.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a as u32).product::<u32>() as f64)
            .product();
        self.coefficient(alpha) * fact
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            basis: self.basis,
            order: self.order,
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    /// Evaluates `φ(self)` given `φ(a₀)` and its first three derivatives.
    fn compose(&self, d: [f64; 4]) -> Jet {
        let mut tail = self.clone();
        tail.c[0] = 0.0;
        let mut out = Jet::constant(self.dim(), self.order(), d[0]);
        let mut power = tail.clone();
        let weights = [d[1], d[2] / 2.0, d[3] / 6.0];
        for (m, w) in weights.iter().enumerate().take(self.order()) {
            if m > 0 {
                power = &power * &tail;
            }
            if *w != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += w * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sqrt(&self) -> Jet {
        let a = self.value();
        let s = a.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (a * s), 0.375 / (a * a * s)])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        self.compose([a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    /// `self^e` for a real constant exponent; requires a positive base unless
    /// `e` is an integer.
    pub fn powf(&self, e: f64) -> Jet {
        if e.fract() == 0.0 && e.abs() <= 16.0 {
            return self.powi(e as i32);
        }
        let a = self.value();
        self.compose([
            a.powf(e),
            e * a.powf(e - 1.0),
            e * (e - 1.0) * a.powf(e - 2.0),
            e * (e - 1.0) * (e - 2.0) * a.powf(e - 3.0),
        ])
    }

    pub fn powi(&self, e: i32) -> Jet {
        if e < 0 {
            return self.powi(-e).recip();
        }
        let mut out = Jet::constant(self.dim(), self.order(), 1.0);
        let mut base = self.clone();
        let mut k = e;
        while k > 0 {
            if k & 1 == 1 {
                out = &out * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        out
    }

    fn zip_with(&self, rhs: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.dim(), rhs.dim());
        let order = self.order.min(rhs.order);
        let len = self.basis.len(order as usize);
        Jet {
            basis: self.basis,
            order,
            c: (0..len).map(|i| f(self.c[i], rhs.c[i])).collect(),
        }
    }

    fn product(&self, rhs: &Jet) -> Jet {
        debug_assert_eq!(self.dim(), rhs.dim());
        let order = self.order.min(rhs.order);
        let len = self.basis.len(order as usize);
        let mut c = vec![0.0; len];
        for i in 0..len {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            for &(j, k) in &self.basis.mul[i] {
                let k = k as usize;
                if k < len {
                    c[k] += a * rhs.c[j as usize];
                }
            }
        }
        Jet {
            basis: self.basis,
            order,
            c,
        }
    }

    /// `self += a * b`, truncating to the lowest order involved.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let p = a.product(b);
        *self = &*self + &p;
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order >= self.order {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a += b;
            }
        } else {
            *self = &*self + rhs;
        }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order >= self.order {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a -= b;
            }
        } else {
            *self = &*self - rhs;
        }
    }
}

/// Value and all partial derivatives through third order at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet3 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    pub third: Vec<Vec<Vec<f64>>>,
}

impl Jet3 {
    /// Reads off partials from a jet; entries beyond the jet's order are zero.
    pub fn from_jet(j: &Jet) -> Jet3 {
        let n = j.dim();
        let unit = |idx: &[usize]| {
            let mut alpha = vec![0u8; n];
            for &i in idx {
                alpha[i] += 1;
            }
            j.partial(&alpha)
        };
        let grad = (0..n).map(|a| unit(&[a])).collect();
        let hess = (0..n)
            .map(|a| (0..n).map(|b| unit(&[a, b])).collect())
            .collect();
        let third = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| (0..n).map(|c| unit(&[a, b, c])).collect())
                    .collect()
            })
            .collect();
        Jet3 {
            value: j.value(),
            grad,
            hess,
            third,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|x| x.is_finite())
            && self.hess.iter().flatten().all(|x| x.is_finite())
            && self.third.iter().flatten().flatten().all(|x| x.is_finite())
    }
}

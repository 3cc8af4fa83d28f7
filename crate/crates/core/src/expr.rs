//! Closed-form scalar expressions over chart coordinates.
//!
//! Grammar (usual precedence, `^` binds tighter than unary minus and is right
//! associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | coord | param | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | exp | log
//! ```
//!
//! Named parameters are bound to numbers at parse time, so jets never
//! differentiate with respect to them.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value produced while evaluating `{0}`")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Coord(usize),
    Param { name: String, value: f64 },
    Neg(Expr),
    Binary(BinOp, Expr, Expr),
    Call(Func, Expr),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, PartialEq)]
pub struct Expr {
    node: Arc<Node>,
    names: Arc<Vec<String>>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn default_names() -> Arc<Vec<String>> {
    static NAMES: std::sync::OnceLock<Arc<Vec<String>>> = std::sync::OnceLock::new();
    NAMES
        .get_or_init(|| Arc::new((0..8).map(|i| format!("x{i}")).collect()))
        .clone()
}

impl Expr {
    fn wrap(node: Node, names: Arc<Vec<String>>) -> Expr {
        Expr {
            node: Arc::new(node),
            names,
        }
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn constant(v: f64) -> Expr {
        Expr::wrap(Node::Const(v), default_names())
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    /// Coordinate `index`, printed as `x{index}` unless names are attached.
    pub fn coord(index: usize) -> Expr {
        Expr::wrap(Node::Coord(index), default_names())
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.node {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Renames coordinates for printing (parsing and evaluation are unaffected).
    pub fn with_coord_names(&self, names: &[String]) -> Expr {
        let names = Arc::new(names.to_vec());
        self.rename(&names)
    }

    fn rename(&self, names: &Arc<Vec<String>>) -> Expr {
        let node = match &*self.node {
            Node::Neg(a) => Node::Neg(a.rename(names)),
            Node::Binary(op, a, b) => Node::Binary(*op, a.rename(names), b.rename(names)),
            Node::Call(f, a) => Node::Call(*f, a.rename(names)),
            other => other.clone(),
        };
        Expr::wrap(node, names.clone())
    }

    fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        let names = a.names.clone();
        Expr::wrap(Node::Binary(op, a, b), names)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        let names = a.names.clone();
        Expr::wrap(Node::Call(f, a), names)
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn log(self) -> Expr {
        Expr::call(Func::Log, self)
    }

    pub fn powf(self, e: f64) -> Expr {
        Expr::binary(BinOp::Pow, self, Expr::constant(e))
    }

    pub fn div(self, rhs: Expr) -> Expr {
        if rhs.as_const() == Some(1.0) {
            return self;
        }
        Expr::binary(BinOp::Div, self, rhs)
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match &*self.node {
            Node::Coord(i) => Some(*i),
            Node::Const(_) | Node::Param { .. } => None,
            Node::Neg(a) | Node::Call(_, a) => a.max_coord(),
            Node::Binary(_, a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Sorted set of coordinate indices referenced.
    pub fn coords_used(&self) -> Vec<usize> {
        fn walk(e: &Expr, out: &mut Vec<usize>) {
            match &*e.node {
                Node::Coord(i) => out.push(*i),
                Node::Const(_) | Node::Param { .. } => {}
                Node::Neg(a) | Node::Call(_, a) => walk(a, out),
                Node::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        let v = match &*self.node {
            Node::Const(v) => *v,
            Node::Coord(i) => p[*i],
            Node::Param { value, .. } => *value,
            Node::Neg(a) => -a.eval(p)?,
            Node::Binary(op, a, b) => {
                let (x, y) = (a.eval(p)?, b.eval(p)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero in `{self}`")));
                        }
                        x / y
                    }
                    BinOp::Pow => pow_checked(x, y, self)?,
                }
            }
            Node::Call(f, a) => {
                let x = a.eval(p)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::Domain(format!(
                                "log of non-positive value {x} in `{self}`"
                            )));
                        }
                        x.ln()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(ExprError::NonFinite(self.to_string()));
        }
        Ok(v)
    }

    /// Taylor jet of the expression at `p` up to `order` (≤ 3).
    pub fn eval_jet(&self, p: &[f64], order: usize) -> Result<Jet, ExprError> {
        let n = p.len();
        let j = match &*self.node {
            Node::Const(v) => Jet::constant(n, order, *v),
            Node::Param { value, .. } => Jet::constant(n, order, *value),
            Node::Coord(i) => Jet::variable(n, order, *i, p[*i]),
            Node::Neg(a) => -a.eval_jet(p, order)?,
            Node::Binary(op, a, b) => {
                if *op == BinOp::Pow {
                    if let Some(e) = b.as_const() {
                        let base = a.eval_jet(p, order)?;
                        pow_checked(base.value(), e, self)?;
                        return finite(base.powf(e), self);
                    }
                }
                let x = a.eval_jet(p, order)?;
                let y = b.eval_jet(p, order)?;
                match op {
                    BinOp::Add => &x + &y,
                    BinOp::Sub => &x - &y,
                    BinOp::Mul => &x * &y,
                    BinOp::Div => {
                        if y.value() == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero in `{self}`")));
                        }
                        &x / &y
                    }
                    BinOp::Pow => {
                        if x.value() <= 0.0 {
                            return Err(ExprError::Domain(format!(
                                "variable exponent needs a positive base in `{self}`"
                            )));
                        }
                        (&y * &x.ln()).exp()
                    }
                }
            }
            Node::Call(f, a) => {
                let x = a.eval_jet(p, order)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x.value() <= 0.0 {
                            return Err(ExprError::Domain(format!(
                                "log of non-positive value {} in `{self}`",
                                x.value()
                            )));
                        }
                        x.ln()
                    }
                }
            }
        };
        finite(j, self)
    }
}

fn finite(j: Jet, e: &Expr) -> Result<Jet, ExprError> {
    if j.is_finite() {
        Ok(j)
    } else {
        Err(ExprError::NonFinite(e.to_string()))
    }
}

fn pow_checked(x: f64, y: f64, e: &Expr) -> Result<f64, ExprError> {
    if x < 0.0 && y.fract() != 0.0 {
        return Err(ExprError::Domain(format!(
            "fractional power of negative value in `{e}`"
        )));
    }
    if x == 0.0 && y < 0.0 {
        return Err(ExprError::Domain(format!("negative power of zero in `{e}`")));
    }
    Ok(x.powf(y))
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        Expr::binary(BinOp::Add, self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        if rhs.is_zero() {
            return self;
        }
        Expr::binary(BinOp::Sub, self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        if self.as_const() == Some(1.0) {
            return rhs;
        }
        if rhs.as_const() == Some(1.0) {
            return self;
        }
        Expr::binary(BinOp::Mul, self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        if let Some(v) = self.as_const() {
            return Expr::constant(-v);
        }
        let names = self.names.clone();
        Expr::wrap(Node::Neg(self), names)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

impl Expr {
    /// Prints with the minimum parentheses needed for an identical re-parse.
    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        match &*self.node {
            Node::Const(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Node::Coord(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{i}"),
            },
            Node::Param { name, .. } => write!(f, "{name}"),
            Node::Neg(a) => {
                let paren = min_prec > 3;
                if paren {
                    write!(f, "(")?;
                }
                write!(f, "-")?;
                a.write(f, 3)?;
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Node::Binary(op, a, b) => {
                let p = op.precedence();
                let paren = p < min_prec;
                if paren {
                    write!(f, "(")?;
                }
                if *op == BinOp::Pow {
                    a.write(f, p + 1)?;
                    write!(f, "^")?;
                    b.write(f, 3)?;
                } else {
                    a.write(f, p)?;
                    write!(f, "{}", op.symbol())?;
                    b.write(f, p + 1)?;
                }
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

/// Parses `text` over the given coordinate names with no parameters.
pub fn parse_expression(text: &str, coords: &[&str]) -> Result<Expr, ExprError> {
    parse_with_params(text, coords, &BTreeMap::new())
}

/// Parses `text`, binding named parameters to their numeric values.
pub fn parse_with_params(
    text: &str,
    coords: &[&str],
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let names: Arc<Vec<String>> = Arc::new(coords.iter().map(|s| s.to_string()).collect());
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        names,
        params,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: Arc<Vec<String>>,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn node(&self, node: Node) -> Expr {
        Expr::wrap(node, self.names.clone())
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = self.node(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = self.node(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner.as_const() {
                Some(v) if !matches!(self.src.get(self.pos), Some(b'^')) => self.node(Node::Const(-v)),
                _ => self.node(Node::Neg(inner)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(self.node(Node::Binary(BinOp::Pow, base, exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(|v| self.node(Node::Const(v)))
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(f) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(self.node(Node::Call(f, arg)));
        }
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(self.node(Node::Coord(i)));
        }
        if let Some(&value) = self.params.get(name) {
            return Ok(self.node(Node::Param {
                name: name.to_string(),
                value,
            }));
        }
        if name == "pi" {
            return Ok(self.node(Node::Const(std::f64::consts::PI)));
        }
        Err(ExprError::UnknownSymbol {
            name: name.to_string(),
            offset: start,
        })
    }
}

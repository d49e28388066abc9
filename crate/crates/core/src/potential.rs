// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Confining potentials V with value, gradient and Laplacian.
//!
//! Three kinds are supported: a scaled quadratic well, a radial profile given
//! as a table (clamped cubic spline), and an expression in x, y, z, r parsed
//! from text. Expressions are differentiated exactly with a second-order
//! forward jet that carries the value, the gradient and the diagonal of the
//! Hessian.

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A confining potential on R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    dim: usize,
    kind: PotentialKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// scale·|x − center|²
    Quadratic { scale: f64, center: Vec3 },
    Radial(RadialTable),
    Expression { source: String, #[serde(skip)] tree: Option<Expr> },
}

impl PotentialSpec {
    /// V(x) = |x|².
    pub fn quadratic(dim: usize) -> Result<Self> {
        Self::quadratic_with(dim, 1.0, [0.0; 3])
    }

    pub fn quadratic_with(dim: usize, scale: f64, center: Vec3) -> Result<Self> {
        check_dim(dim)?;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("quadratic scale must be positive, got {scale}")));
        }
        if dim == 2 && center[2] != 0.0 {
            return Err(Error::InvalidParameter("2D centre must have zero third coordinate".into()));
        }
        Ok(Self { dim, kind: PotentialKind::Quadratic { scale, center } })
    }

    /// Radial profile V(|x|) from samples at increasing radii starting at 0.
    pub fn radial_table(dim: usize, radii: &[f64], values: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim, kind: PotentialKind::Radial(RadialTable::new(radii, values)?) })
    }

    /// Parse an expression such as `x^2 + 2*y^2` or `r^4 - log(1 + r^2)`.
    pub fn expression(dim: usize, source: &str) -> Result<Self> {
        check_dim(dim)?;
        let tree = Parser::new(source, dim)?.parse()?;
        Ok(Self { dim, kind: PotentialKind::Expression { source: source.trim().to_string(), tree: Some(tree) } })
    }

    /// Parse the command-line form: `quadratic`, `quadratic:SCALE`,
    /// `expr:EXPRESSION`, or `table:PATH` (two whitespace-separated columns r, V).
    pub fn from_cli(dim: usize, text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "quadratic" {
            return Self::quadratic(dim);
        }
        if let Some(s) = text.strip_prefix("quadratic:") {
            let scale = s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad quadratic scale '{s}'")))?;
            return Self::quadratic_with(dim, scale, [0.0; 3]);
        }
        if let Some(e) = text.strip_prefix("expr:") {
            return Self::expression(dim, e);
        }
        if let Some(path) = text.strip_prefix("table:") {
            let body = std::fs::read_to_string(path.trim())?;
            let mut r = Vec::new();
            let mut v = Vec::new();
            for (i, line) in body.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
                let parse = |s: &str| {
                    s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("{path}:{}: bad number '{s}'", i + 1)))
                };
                if cols.len() != 2 {
                    return Err(Error::InvalidParameter(format!("{path}:{}: expected two columns", i + 1)));
                }
                r.push(parse(cols[0])?);
                v.push(parse(cols[1])?);
            }
            return Self::radial_table(dim, &r, &v);
        }
        Err(Error::InvalidParameter(format!(
            "unknown potential '{text}' (use quadratic, quadratic:SCALE, expr:..., table:PATH)"
        )))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// True for V = s|x|² centred at the origin.
    pub fn is_centered_quadratic(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Quadratic { scale, center } if *center == [0.0; 3] => Some(*scale),
            _ => None,
        }
    }

    fn jet(&self, x: Vec3) -> Jet {
        match &self.kind {
            PotentialKind::Quadratic { scale, center } => {
                let y = geom::sub(x, *center);
                let mut j = Jet::constant(scale * geom::norm2(y));
                for k in 0..self.dim {
                    j.g[k] = 2.0 * scale * y[k];
                    j.h[k] = 2.0 * scale;
                }
                j
            }
            PotentialKind::Radial(t) => {
                let r = geom::norm(x);
                let (v, d1, d2) = t.eval(r);
                let mut j = Jet::constant(v);
                for k in 0..self.dim {
                    if r > 0.0 {
                        let u = x[k] / r;
                        j.g[k] = d1 * u;
                        j.h[k] = d2 * u * u + d1 * (1.0 - u * u) / r;
                    } else {
                        // V'(0) = 0 for the clamped spline
                        j.h[k] = d2;
                    }
                }
                j
            }
            PotentialKind::Expression { source, tree } => match tree {
                Some(t) => t.eval(x),
                None => Parser::new(source, self.dim).and_then(|p| p.parse()).map(|t| t.eval(x)).unwrap_or(Jet::constant(f64::NAN)),
            },
        }
    }

    pub fn value(&self, x: Vec3) -> f64 {
        match &self.kind {
            PotentialKind::Quadratic { scale, center } => scale * geom::norm2(geom::sub(x, *center)),
            _ => self.jet(x).v,
        }
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        self.jet(x).g
    }

    pub fn laplacian(&self, x: Vec3) -> f64 {
        let j = self.jet(x);
        j.h[..self.dim].iter().sum()
    }

    /// Whether V(x) = V(x with coordinate `axis` negated) on sample points.
    pub fn mirror_symmetric(&self, axis: usize, scale: f64) -> bool {
        let samples = [[0.31, 0.17, 0.23], [0.7, -0.4, 0.55], [-0.12, 0.9, -0.8], [1.3, 0.6, 0.05]];
        samples.iter().all(|s| {
            let mut x = geom::scale(*s, scale);
            if self.dim == 2 {
                x[2] = 0.0;
            }
            let mut y = x;
            y[axis] = -y[axis];
            let (a, b) = (self.value(x), self.value(y));
            (a - b).abs() <= 1e-13 * (1.0 + a.abs())
        })
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PotentialKind::Quadratic { scale, center } => {
                if *center == [0.0; 3] {
                    write!(f, "{scale}|x|^2")
                } else {
                    write!(f, "{scale}|x - {center:?}|^2")
                }
            }
            PotentialKind::Radial(t) => write!(f, "radial table ({} knots, r ≤ {})", t.r.len(), t.r[t.r.len() - 1]),
            PotentialKind::Expression { source, .. } => write!(f, "{source}"),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")))
    }
}

/// Clamped cubic spline (V'(0) = 0, natural at the far end), continued
/// quadratically beyond the last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    r: Vec<f64>,
    v: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl RadialTable {
    pub fn new(r: &[f64], v: &[f64]) -> Result<Self> {
        let n = r.len();
        if n < 3 || v.len() != n {
            return Err(Error::InvalidParameter("radial table needs at least 3 (r, V) pairs of equal length".into()));
        }
        if r[0] != 0.0 {
            return Err(Error::InvalidParameter("radial table must start at r = 0".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r.iter().chain(v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("radii must be finite and strictly increasing".into()));
        }
        // tridiagonal system for the knot second derivatives
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let h0 = r[1] - r[0];
        b[0] = h0 / 3.0;
        c[0] = h0 / 6.0;
        d[0] = (v[1] - v[0]) / h0;
        for i in 1..n - 1 {
            let (hl, hr) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            a[i] = hl / 6.0;
            b[i] = (hl + hr) / 3.0;
            c[i] = hr / 6.0;
            d[i] = (v[i + 1] - v[i]) / hr - (v[i] - v[i - 1]) / hl;
        }
        b[n - 1] = 1.0;
        // Thomas algorithm
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
        }
        Ok(Self { r: r.to_vec(), v: v.to_vec(), m })
    }

    /// (V, V', V'') at radius r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let n = self.r.len();
        let last = self.r[n - 1];
        if r > last {
            let (v, d1, d2) = self.eval(last);
            let s = r - last;
            return (v + d1 * s + 0.5 * d2 * s * s, d1 + d2 * s, d2);
        }
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - r) / h;
        let b = (r - self.r[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.v[i] + b * self.v[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.v[i + 1] - self.v[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}

/// Value, gradient and Hessian diagonal of a scalar function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Vec3,
    pub h: Vec3,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, g: [0.0; 3], h: [0.0; 3] }
    }

    fn variable(v: f64, axis: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[axis] = 1.0;
        j
    }

    // φ(self) given φ, φ', φ''
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for k in 0..3 {
            out.g[k] = f1 * self.g[k];
            out.h[k] = f1 * self.h[k] + f2 * self.g[k] * self.g[k];
        }
        out
    }

    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, g: geom::add(self.g, o.g), h: geom::add(self.h, o.h) }
    }

    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, g: geom::sub(self.g, o.g), h: geom::sub(self.h, o.h) }
    }

    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for k in 0..3 {
            out.g[k] = self.g[k] * o.v + self.v * o.g[k];
            out.h[k] = self.h[k] * o.v + 2.0 * self.g[k] * o.g[k] + self.v * o.h[k];
        }
        out
    }

    fn recip(self) -> Self {
        let u = self.v;
        self.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u))
    }

    fn powf(self, p: f64) -> Self {
        let u = self.v;
        if p == 0.0 {
            return Self::constant(1.0);
        }
        if p.fract() == 0.0 && p.abs() < 64.0 {
            let n = p as i32;
            let f2 = if n == 1 { 0.0 } else { p * (p - 1.0) * u.powi(n - 2) };
            return self.chain(u.powi(n), p * u.powi(n - 1), f2);
        }
        self.chain(u.powf(p), p * u.powf(p - 1.0), p * (p - 1.0) * u.powf(p - 2.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Log,
    Exp,
    Sqrt,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Radius,
    Neg(Box<Expr>),
    Call(FuncTag, Box<Expr>),
    Bin(OpTag, Box<Expr>, Box<Expr>),
}

/// Opaque function tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuncTag(Func);

/// Opaque operator tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpTag(BinOp);

impl Expr {
    pub fn eval(&self, x: Vec3) -> Jet {
        match self {
            Expr::Num(c) => Jet::constant(*c),
            Expr::Var(k) => Jet::variable(x[*k], *k),
            Expr::Radius => {
                let mut s = Jet::constant(0.0);
                for k in 0..3 {
                    let v = Jet::variable(x[k], k);
                    s = s.add(v.mul(v));
                }
                let r = s.v.sqrt();
                s.chain(r, 0.5 / r, -0.25 / (r * s.v))
            }
            Expr::Neg(e) => {
                let j = e.eval(x);
                Jet { v: -j.v, g: geom::scale(j.g, -1.0), h: geom::scale(j.h, -1.0) }
            }
            Expr::Call(FuncTag(f), e) => {
                let j = e.eval(x);
                let u = j.v;
                match f {
                    Func::Log => j.chain(u.ln(), 1.0 / u, -1.0 / (u * u)),
                    Func::Exp => {
                        let e = u.exp();
                        j.chain(e, e, e)
                    }
                    Func::Sqrt => {
                        let s = u.sqrt();
                        j.chain(s, 0.5 / s, -0.25 / (s * u))
                    }
                    Func::Sin => j.chain(u.sin(), u.cos(), -u.sin()),
                    Func::Cos => j.chain(u.cos(), -u.sin(), -u.cos()),
                }
            }
            Expr::Bin(OpTag(op), a, b) => {
                let ja = a.eval(x);
                match op {
                    BinOp::Pow => {
                        if let Expr::Num(p) = **b {
                            ja.powf(p)
                        } else {
                            let jb = b.eval(x);
                            // a^b = exp(b log a)
                            let l = ja.chain(ja.v.ln(), 1.0 / ja.v, -1.0 / (ja.v * ja.v)).mul(jb);
                            let e = l.v.exp();
                            l.chain(e, e, e)
                        }
                    }
                    _ => {
                        let jb = b.eval(x);
                        match op {
                            BinOp::Add => ja.add(jb),
                            BinOp::Sub => ja.sub(jb),
                            BinOp::Mul => ja.mul(jb),
                            BinOp::Div => ja.mul(jb.recip()),
                            BinOp::Pow => unreachable!(),
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    source: String,
}

impl Parser {
    fn new(source: &str, dim: usize) -> Result<Self> {
        let mut tokens = Vec::new();
        let chars: Vec<char> = source.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || ((chars[i] == 'e' || chars[i] == 'E') && i + 1 < chars.len())
                        || ((chars[i] == '+' || chars[i] == '-') && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number '{s}' in '{source}'")))?;
                tokens.push(Token::Num(v));
            } else if c.is_ascii_alphabetic() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            } else if "+-*/^()".contains(c) {
                tokens.push(Token::Op(c));
                i += 1;
            } else {
                return Err(Error::InvalidParameter(format!("unexpected character '{c}' in '{source}'")));
            }
        }
        Ok(Self { tokens, pos: 0, dim, source: source.to_string() })
    }

    fn err(&self, what: &str) -> Error {
        Error::InvalidParameter(format!("{what} in potential expression '{}'", self.source))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if self.tokens.is_empty() {
            return Err(self.err("empty expression"));
        }
        let e = self.sum()?;
        if self.pos != self.tokens.len() {
            return Err(self.err("trailing input"));
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::Bin(OpTag(op), Box::new(e), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(e);
            };
            e = Expr::Bin(OpTag(op), Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(OpTag(BinOp::Pow), Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Op('(') => {
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.err("missing ')'"));
                }
                Ok(e)
            }
            Token::Op(c) => Err(self.err(&format!("unexpected '{c}'"))),
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "log" | "ln" => Some(Func::Log),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(self.err(&format!("expected '(' after {name}")));
                    }
                    let e = self.sum()?;
                    if !self.eat(')') {
                        return Err(self.err("missing ')'"));
                    }
                    return Ok(Expr::Call(FuncTag(f), Box::new(e)));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var(0)),
                    "y" => Ok(Expr::Var(1)),
                    "z" if self.dim == 3 => Ok(Expr::Var(2)),
                    "r" => Ok(Expr::Radius),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => Err(self.err(&format!("unknown name '{name}'"))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(v: &PotentialSpec, x: Vec3) {
        let h = 1e-4;
        let mut lap = 0.0;
        let g = v.gradient(x);
        for k in 0..v.dim() {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            let d1 = (v.value(a) - v.value(b)) / (2.0 * h);
            assert!((d1 - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "{d1} vs {}", g[k]);
            lap += (v.value(a) - 2.0 * v.value(x) + v.value(b)) / (h * h);
        }
        assert!((lap - v.laplacian(x)).abs() < 1e-4 * (1.0 + lap.abs()), "{lap} vs {}", v.laplacian(x));
    }

    #[test]
    fn quadratic_laplacian() {
        let v = PotentialSpec::quadratic(2).unwrap();
        assert_eq!(v.laplacian([0.3, 0.2, 0.0]), 4.0);
        let v = PotentialSpec::quadratic(3).unwrap();
        assert_eq!(v.laplacian([0.3, 0.2, 0.1]), 6.0);
        assert_eq!(v.value([1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn expressions_differentiate_exactly() {
        let v = PotentialSpec::expression(2, "x^2 + 2*y^2 - 0.1*log(1 + r^2) + exp(-x)*cos(y)/3").unwrap();
        fd_check(&v, [0.4, -0.7, 0.0]);
        let v = PotentialSpec::expression(3, "r^4/4 + sqrt(1+z^2) - 2^x").unwrap();
        fd_check(&v, [0.3, 0.5, -0.2]);
        let q = PotentialSpec::expression(2, "x^2+y^2").unwrap();
        assert_eq!(q.laplacian([0.1, 0.2, 0.0]), 4.0);
        assert!((PotentialSpec::expression(2, "-2^2").unwrap().value([0.0; 3]) + 4.0).abs() < 1e-15);
        assert!((PotentialSpec::expression(2, "1e-1*3").unwrap().value([0.0; 3]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "x +", "foo(x)", "(x", "z", "x $ 2", "log x"] {
            assert!(PotentialSpec::expression(2, bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn radial_table_reproduces_quadratic() {
        let r: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = r.iter().map(|r| r * r).collect();
        let t = PotentialSpec::radial_table(2, &r, &v).unwrap();
        for x in [[0.3, 0.4, 0.0], [1.1, -0.2, 0.0], [0.0, 0.0, 0.0]] {
            assert!((t.value(x) - geom::norm2(x)).abs() < 1e-3);
            assert!((t.laplacian(x) - 4.0).abs() < 0.05, "{}", t.laplacian(x));
        }
        fd_check(&t, [0.33, 0.61, 0.0]);
        assert!(PotentialSpec::radial_table(2, &[0.1, 0.2, 0.3], &[0.0; 3]).is_err());
    }

    #[test]
    fn mirror_symmetry_detection() {
        let v = PotentialSpec::expression(2, "x^2 + y^4 + x*y").unwrap();
        assert!(!v.mirror_symmetric(0, 1.0));
        let w = PotentialSpec::expression(3, "x^2 + y^4 + 3*z^2").unwrap();
        assert!((0..3).all(|k| w.mirror_symmetric(k, 1.0)));
    }
}

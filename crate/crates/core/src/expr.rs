//! A small complex expression language.
//!
//! Expressions are built from named variables, complex constants (`i`, `pi`,
//! decimal and imaginary literals such as `2.5i`), the four arithmetic
//! operations, integer powers and the entire functions `exp`, `sin`, `cos`,
//! plus the principal `log`. They are used for form coefficients (variables
//! are the chart coordinates) and for path segments (the single variable is
//! the parameter `s`).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Powi(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn constant(z: impl Into<Complex64>) -> Self {
        Expr::Const(z.into())
    }

    pub fn real(x: f64) -> Self {
        Expr::Const(Complex64::new(x, 0.0))
    }

    pub fn zero() -> Self {
        Expr::real(0.0)
    }

    pub fn one() -> Self {
        Expr::real(1.0)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    pub fn powi(self, n: i32) -> Self {
        match (n, &self) {
            (0, _) => Expr::one(),
            (1, _) => self,
            (_, Expr::Const(c)) => Expr::Const(c.powi(n)),
            _ => Expr::Powi(Arc::new(self), n),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Self {
        match arg {
            Expr::Const(c) => Expr::Const(f.apply(c)),
            other => Expr::Call(f, Arc::new(other)),
        }
    }

    pub fn exp(self) -> Self {
        Expr::call(Func::Exp, self)
    }

    pub fn ln(self) -> Self {
        Expr::call(Func::Log, self)
    }

    pub fn sin(self) -> Self {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Self {
        Expr::call(Func::Cos, self)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Powi(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    pub fn eval(&self, vars: &[Complex64]) -> Complex64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Powi(a, n) => a.eval(vars).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    /// Evaluates and rejects NaN or infinite results.
    pub fn eval_finite(&self, vars: &[Complex64]) -> Result<Complex64> {
        let z = self.eval(vars);
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(Error::Evaluation { what: self.to_string() })
        }
    }

    /// Symbolic (holomorphic) derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(a) => -a.diff(var),
            Expr::Add(a, b) => a.diff(var) + b.diff(var),
            Expr::Sub(a, b) => a.diff(var) - b.diff(var),
            Expr::Mul(a, b) => {
                a.diff(var) * b.as_ref().clone() + a.as_ref().clone() * b.diff(var)
            }
            Expr::Div(a, b) => {
                let num = a.diff(var) * b.as_ref().clone() - a.as_ref().clone() * b.diff(var);
                num / b.as_ref().clone().powi(2)
            }
            Expr::Powi(a, n) => {
                Expr::real(f64::from(*n)) * a.as_ref().clone().powi(n - 1) * a.diff(var)
            }
            Expr::Call(f, a) => {
                let inner = a.as_ref().clone();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => Expr::one() / inner,
                    Func::Sin => inner.cos(),
                    Func::Cos => -inner.sin(),
                };
                outer * a.diff(var)
            }
        }
    }

    /// Replaces variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(i) => subs[*i].clone(),
            Expr::Neg(a) => -a.substitute(subs),
            Expr::Add(a, b) => a.substitute(subs) + b.substitute(subs),
            Expr::Sub(a, b) => a.substitute(subs) - b.substitute(subs),
            Expr::Mul(a, b) => a.substitute(subs) * b.substitute(subs),
            Expr::Div(a, b) => a.substitute(subs) / b.substitute(subs),
            Expr::Powi(a, n) => a.substitute(subs).powi(*n),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(subs)),
        }
    }

    /// Parses `src`, resolving identifiers against `vars` first and then the
    /// constants `i` and `pi`.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let mut p = Parser { src, pos: 0, vars };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            _ if self.is_zero() => rhs,
            _ if rhs.is_zero() => self,
            _ => Expr::Add(Arc::new(self), Arc::new(rhs)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
            _ if rhs.is_zero() => self,
            _ if self.is_zero() => -rhs,
            _ => Expr::Sub(Arc::new(self), Arc::new(rhs)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            _ if self.is_zero() || rhs.is_zero() => Expr::zero(),
            _ if self.is_one() => rhs,
            _ if rhs.is_one() => self,
            _ => Expr::Mul(Arc::new(self), Arc::new(rhs)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a / b),
            _ if rhs.is_one() => self,
            _ if self.is_zero() => Expr::zero(),
            _ => Expr::Div(Arc::new(self), Arc::new(rhs)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(a) => a.as_ref().clone(),
            other => Expr::Neg(Arc::new(other)),
        }
    }
}

impl From<f64> for Expr {
    fn from(x: f64) -> Self {
        Expr::real(x)
    }
}

impl From<Complex64> for Expr {
    fn from(z: Complex64) -> Self {
        Expr::Const(z)
    }
}

fn fmt_const(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(f, "{}", c.re)
    } else if c.re == 0.0 {
        write!(f, "{}i", c.im)
    } else {
        write!(f, "({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(i) => write!(f, "${i}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/({b})"),
            Expr::Powi(a, n) => write!(f, "({a})^{n}"),
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let neg = self.eat('-');
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            let n: i32 = self.src[start..self.pos]
                .parse()
                .map_err(|_| self.err("expected an integer exponent"))?;
            return Ok(base.powi(if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.pos += self.peek().map_or(1, char::len_utf8);
                }
                let name = &self.src[start..self.pos];
                if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(idx));
                }
                if let Some(func) = Func::from_name(name) {
                    if !self.eat('(') {
                        return Err(self.err("expected `(` after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(Expr::call(func, arg));
                }
                match name {
                    "i" => Ok(Expr::Const(Complex64::i())),
                    "pi" => Ok(Expr::real(std::f64::consts::PI)),
                    _ => Err(Error::Parse {
                        pos: start,
                        msg: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        // exponent part, only when followed by a digit or sign+digit
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut k = self.pos + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                self.pos = k;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let x: f64 = self.src[start..self.pos]
            .parse()
            .map_err(|_| Error::Parse {
                pos: start,
                msg: "malformed number".into(),
            })?;
        let imaginary = self.pos < bytes.len()
            && bytes[self.pos] == b'i'
            && !bytes
                .get(self.pos + 1)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_');
        if imaginary {
            self.pos += 1;
            Ok(Expr::Const(Complex64::new(0.0, x)))
        } else {
            Ok(Expr::real(x))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("x^3 + y^2", &["x", "y"]).unwrap();
        assert_eq!(e.eval(&[c(2.0, 0.0), c(0.0, 1.0)]), c(7.0, 0.0));
        let e = Expr::parse("exp(2*pi*i*s)", &["s"]).unwrap();
        let z = e.eval(&[c(0.25, 0.0)]);
        assert!((z - c(0.0, 1.0)).norm() < 1e-15);
        let e = Expr::parse("3i - 2.5e-1 / z", &["z"]).unwrap();
        assert!((e.eval(&[c(1.0, 0.0)]) - c(-0.25, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = Expr::parse("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[c(3.0, 0.0)]), c(-9.0, 0.0));
        let e = Expr::parse("x^-2", &["x"]).unwrap();
        assert_eq!(e.eval(&[c(2.0, 0.0)]), c(0.25, 0.0));
    }

    #[test]
    fn rejects_bad_input_with_position() {
        match Expr::parse("x + * y", &["x", "y"]) {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Expr::parse("q", &["x"]),
            Err(Error::Parse { pos: 0, .. })
        ));
        assert!(Expr::parse("(x", &["x"]).is_err());
        assert!(Expr::parse("x ^ 1.5", &["x"]).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = Expr::parse("exp(x*y)/(x^2 + 1) + log(y) * sin(x) - cos(y)^3", &["x", "y"])
            .unwrap();
        let p = [c(0.3, 0.2), c(1.1, -0.4)];
        for var in 0..2 {
            let d = e.diff(var).eval(&p);
            let h = 1e-6;
            let mut hi = p;
            let mut lo = p;
            hi[var] += h;
            lo[var] -= h;
            let fd = (e.eval(&hi) - e.eval(&lo)) / (2.0 * h);
            assert!((d - fd).norm() < 1e-7, "var {var}: {d} vs {fd}");
        }
    }

    #[test]
    fn log_of_zero_is_an_evaluation_error() {
        let e = Expr::parse("log(z)", &["z"]).unwrap();
        assert!(e.eval_finite(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn substitution_composes() {
        let f = Expr::parse("x*y", &["x", "y"]).unwrap();
        let s = Expr::parse("s", &["s"]).unwrap();
        let g = f.substitute(&[s.clone() + Expr::one(), s.powi(2)]);
        assert_eq!(g.eval(&[c(2.0, 0.0)]), c(12.0, 0.0));
    }
}

//! Symbolic calculus of exponential iterated integrals.
//!
//! Elements are finite complex combinations of [`ExpWord`]s plus a constant
//! ([`ExpSum`]). The coproduct is deconcatenation at exponents, the antipode
//! reverses a word and negates its exponents, and the counit evaluates on the
//! constant loop. The product follows the recursion on total length: split
//! off the last linear form of one factor, deconcatenate the other, and
//! reassemble. Integration along a path is an algebra homomorphism into `C`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::RwLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{FormId, FormModule, FormTable, OneForm, Path};
use crate::transport::Evaluator;
use crate::word::{ExpWord, Exponent};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `constant + sum_w c_w int w`. The unit word never appears as a key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpSum {
    constant: Complex64,
    terms: BTreeMap<ExpWord, Complex64>,
}

impl ExpSum {
    pub fn zero() -> Self {
        ExpSum::default()
    }

    pub fn one() -> Self {
        ExpSum::scalar(ONE)
    }

    pub fn scalar(c: Complex64) -> Self {
        ExpSum {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn word(w: ExpWord) -> Self {
        let mut s = ExpSum::zero();
        s.add_word(w, ONE);
        s
    }

    pub fn add_word(&mut self, w: ExpWord, c: Complex64) {
        if w.is_unit() {
            self.constant += c;
            return;
        }
        accumulate(&mut self.terms, w, c);
    }

    pub fn add(&self, other: &ExpSum) -> ExpSum {
        let mut out = self.clone();
        out.constant += other.constant;
        for (w, c) in &other.terms {
            out.add_word(w.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &ExpSum) -> ExpSum {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, k: Complex64) -> ExpSum {
        if k == ZERO {
            return ExpSum::zero();
        }
        ExpSum {
            constant: self.constant * k,
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c * k)).collect(),
        }
    }

    pub fn constant(&self) -> Complex64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExpWord, Complex64)> {
        self.terms.iter().map(|(w, c)| (w, *c))
    }

    /// Terms with the constant included as the unit word.
    pub fn all_terms(&self) -> Vec<(ExpWord, Complex64)> {
        let mut v = Vec::with_capacity(self.terms.len() + 1);
        if self.constant != ZERO {
            v.push((ExpWord::unit(), self.constant));
        }
        v.extend(self.terms.iter().map(|(w, c)| (w.clone(), *c)));
        v
    }

    pub fn is_zero(&self) -> bool {
        self.constant == ZERO && self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest word length; 0 for constants.
    pub fn length(&self) -> usize {
        self.terms.keys().map(ExpWord::length).max().unwrap_or(0)
    }

    pub fn symbols(&self) -> BTreeSet<FormId> {
        self.terms.keys().flat_map(|w| w.symbols().cloned()).collect()
    }

    /// Parses the word-expression grammar: `e{d}` exponents (integer
    /// combinations of names), linear form names, juxtaposition, `+`/`-`,
    /// and real, imaginary (`2i`) or parenthesized complex coefficients.
    pub fn parse(src: &str) -> Result<ExpSum> {
        let mut p = WordParser { s: src.as_bytes(), pos: 0 };
        let sum = p.sum()?;
        p.ws();
        if p.pos < p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(sum)
    }
}

impl ExpWord {
    /// Parses a single word; `1` is the unit word.
    pub fn parse(src: &str) -> Result<ExpWord> {
        let s = ExpSum::parse(src)?;
        let all = s.all_terms();
        match all.as_slice() {
            [(w, c)] if *c == ONE => Ok(w.clone()),
            _ => Err(Error::Parse {
                pos: 0,
                msg: format!("`{src}` is not a single word"),
            }),
        }
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// Sign and body of a coefficient; the body is empty for 1.
fn coefficient_parts(c: Complex64) -> (bool, String) {
    if c.im == 0.0 {
        let neg = c.re < 0.0;
        let a = c.re.abs();
        (neg, if a == 1.0 { String::new() } else { fmt_real(a) })
    } else if c.re == 0.0 {
        (c.im < 0.0, format!("{}i", fmt_real(c.im.abs())))
    } else {
        let sign = if c.im < 0.0 { '-' } else { '+' };
        (false, format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs())))
    }
}

impl fmt::Display for ExpSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let all = self.all_terms();
        if all.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in all.iter().enumerate() {
            let (neg, body) = coefficient_parts(*c);
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match (w.is_unit(), body.is_empty()) {
                (true, true) => f.write_str("1")?,
                (true, false) => f.write_str(&body)?,
                (false, true) => write!(f, "{w}")?,
                (false, false) => write!(f, "{body}*{w}")?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SumRepr {
    constant: [f64; 2],
    terms: Vec<(String, [f64; 2])>,
}

impl Serialize for ExpSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SumRepr {
            constant: [self.constant.re, self.constant.im],
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (w.to_string(), [c.re, c.im]))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExpSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SumRepr::deserialize(d)?;
        let mut out = ExpSum::scalar(Complex64::new(repr.constant[0], repr.constant[1]));
        for (w, [re, im]) in repr.terms {
            let word = ExpWord::parse(&w).map_err(serde::de::Error::custom)?;
            out.add_word(word, Complex64::new(re, im));
        }
        Ok(out)
    }
}

struct WordParser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl WordParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        self.ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<ExpSum> {
        let mut out = ExpSum::zero();
        self.ws();
        if self.pos >= self.s.len() {
            return Err(self.err("empty expression"));
        }
        let mut sign = if self.eat(b'-') {
            -ONE
        } else {
            self.eat(b'+');
            ONE
        };
        loop {
            let (w, c) = self.term()?;
            out.add_word(w, c * sign);
            self.ws();
            match self.peek() {
                Some(b'+') => sign = ONE,
                Some(b'-') => sign = -ONE,
                _ => break,
            }
            self.pos += 1;
        }
        Ok(out)
    }

    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        let mut end = start;
        let digits = |e: &mut usize, s: &[u8]| {
            while s.get(*e).is_some_and(u8::is_ascii_digit) {
                *e += 1;
            }
        };
        digits(&mut end, self.s);
        if self.s.get(end) == Some(&b'.') {
            end += 1;
            digits(&mut end, self.s);
        }
        if end == start || (end == start + 1 && self.s[start] == b'.') {
            return None;
        }
        if matches!(self.s.get(end), Some(b'e' | b'E')) {
            let mut e = end + 1;
            if matches!(self.s.get(e), Some(b'+' | b'-')) {
                e += 1;
            }
            if self.s.get(e).is_some_and(u8::is_ascii_digit) {
                digits(&mut e, self.s);
                end = e;
            }
        }
        let text = std::str::from_utf8(&self.s[start..end]).ok()?;
        let v = text.parse().ok()?;
        self.pos = end;
        Some(v)
    }

    /// A number with an optional imaginary-unit suffix.
    fn scalar(&mut self) -> Option<Complex64> {
        let x = self.number()?;
        if self.peek() == Some(b'i') && !self.s.get(self.pos + 1).is_some_and(|b| is_ident(*b)) {
            self.pos += 1;
            Some(Complex64::new(0.0, x))
        } else {
            Some(Complex64::new(x, 0.0))
        }
    }

    fn coefficient(&mut self) -> Result<Option<Complex64>> {
        self.ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut acc = ZERO;
            let mut first = true;
            loop {
                self.ws();
                if self.eat(b')') {
                    break;
                }
                let sign = if self.eat(b'-') {
                    -1.0
                } else if self.eat(b'+') || first {
                    1.0
                } else {
                    return Err(self.err("expected `+`, `-` or `)` in coefficient"));
                };
                self.ws();
                let v = self.scalar().ok_or_else(|| self.err("expected a number"))?;
                acc += v * sign;
                first = false;
            }
            if first {
                return Err(self.err("empty coefficient"));
            }
            return Ok(Some(acc));
        }
        Ok(self.scalar())
    }

    fn term(&mut self) -> Result<(ExpWord, Complex64)> {
        let coef = self.coefficient()?;
        self.ws();
        if coef.is_some() {
            self.eat(b'*');
            self.ws();
        }
        let at_end = matches!(self.peek(), None | Some(b'+' | b'-' | b')'));
        match (coef, at_end) {
            (Some(c), true) => Ok((ExpWord::unit(), c)),
            (None, true) => Err(self.err("expected a term")),
            (c, false) => Ok((self.word()?, c.unwrap_or(ONE))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.ws();
        let start = self.pos;
        if !self.peek().is_some_and(is_ident_start) {
            return Err(self.err("expected a name"));
        }
        while self.peek().is_some_and(is_ident) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn exponent(&mut self) -> Result<Exponent> {
        let mut e = Exponent::zero();
        let mut first = true;
        loop {
            self.ws();
            if self.eat(b'}') {
                if first {
                    return Err(self.err("empty exponent"));
                }
                return Ok(e);
            }
            let sign: i64 = if self.eat(b'-') {
                -1
            } else if self.eat(b'+') || first {
                1
            } else {
                return Err(self.err("expected `+`, `-` or `}` in exponent"));
            };
            self.ws();
            let start = self.pos;
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: i64 = if self.pos > start {
                std::str::from_utf8(&self.s[start..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| self.err("integer coefficient too large"))?
            } else {
                1
            };
            self.eat(b'*');
            self.ws();
            if self.pos > start && matches!(self.peek(), Some(b'}' | b'+' | b'-')) {
                if k != 0 {
                    return Err(self.err("exponents are integer combinations of names"));
                }
            } else {
                let name = self.ident()?;
                e = e.add(&Exponent::scaled(name.as_str(), sign * k));
            }
            first = false;
        }
    }

    fn word(&mut self) -> Result<ExpWord> {
        let mut exponents = vec![Exponent::zero()];
        let mut linears = Vec::new();
        let mut exponent_set = false;
        let mut items = 0;
        loop {
            self.ws();
            match self.peek() {
                None | Some(b'+' | b'-' | b')') => break,
                Some(b'e') if self.s.get(self.pos + 1) == Some(&b'{') => {
                    if exponent_set {
                        return Err(self.err("consecutive exponents need a linear form between them"));
                    }
                    self.pos += 2;
                    *exponents.last_mut().unwrap() = self.exponent()?;
                    exponent_set = true;
                }
                Some(b'1') if items == 0 => {
                    self.pos += 1;
                    exponent_set = true;
                }
                Some(b) if is_ident_start(b) => {
                    let name = self.ident()?;
                    linears.push(FormId::new(&name));
                    exponents.push(Exponent::zero());
                    exponent_set = false;
                }
                Some(_) => return Err(self.err("unexpected character in word")),
            }
            items += 1;
        }
        ExpWord::new(exponents, linears)
    }
}

/// `sum c (left (x) right)`; the unit word stands for `1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorSum {
    terms: BTreeMap<(ExpWord, ExpWord), Complex64>,
}

impl TensorSum {
    pub fn zero() -> Self {
        TensorSum::default()
    }

    pub fn add_term(&mut self, left: ExpWord, right: ExpWord, c: Complex64) {
        let key = (left, right);
        let e = self.terms.entry(key.clone()).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExpWord, &ExpWord, Complex64)> {
        self.terms.iter().map(|((l, r), c)| (l, r, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(Delta (x) 1)` applied to this tensor.
    pub fn coproduct_left(&self) -> BTreeMap<[ExpWord; 3], Complex64> {
        let mut out = BTreeMap::new();
        for ((l, r), c) in &self.terms {
            for (a, b, k) in coproduct(l).terms() {
                accumulate(&mut out, [a.clone(), b.clone(), r.clone()], c * k);
            }
        }
        out
    }

    /// `(1 (x) Delta)` applied to this tensor.
    pub fn coproduct_right(&self) -> BTreeMap<[ExpWord; 3], Complex64> {
        let mut out = BTreeMap::new();
        for ((l, r), c) in &self.terms {
            for (a, b, k) in coproduct(r).terms() {
                accumulate(&mut out, [l.clone(), a.clone(), b.clone()], c * k);
            }
        }
        out
    }
}

fn accumulate<K: Ord + Clone>(map: &mut BTreeMap<K, Complex64>, key: K, c: Complex64) {
    let e = map.entry(key.clone()).or_insert(ZERO);
    *e += c;
    if *e == ZERO {
        map.remove(&key);
    }
}

impl Serialize for TensorSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<(String, String, [f64; 2])> = self
            .terms
            .iter()
            .map(|((l, r), c)| (l.to_string(), r.to_string(), [c.re, c.im]))
            .collect();
        terms.serialize(s)
    }
}

impl fmt::Display for TensorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, ((l, r), c)) in self.terms.iter().enumerate() {
            let (neg, body) = coefficient_parts(*c);
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if !body.is_empty() {
                write!(f, "{body}*")?;
            }
            write!(f, "[{l}] (x) [{r}]")?;
        }
        Ok(())
    }
}

/// `Delta w = sum_k (w through exponent k) (x) (w from exponent k)`.
pub fn coproduct(w: &ExpWord) -> TensorSum {
    let mut out = TensorSum::zero();
    for k in 0..w.exponents().len() {
        out.add_term(w.prefix(k), w.suffix(k), ONE);
    }
    out
}

pub fn coproduct_sum(s: &ExpSum) -> TensorSum {
    let mut out = TensorSum::zero();
    for (w, c) in s.all_terms() {
        for (l, r, k) in coproduct(&w).terms() {
            out.add_term(l.clone(), r.clone(), c * k);
        }
    }
    out
}

/// `i(w) = (-1)^length` times the reversed word with negated exponents.
pub fn antipode(w: &ExpWord) -> (i32, ExpWord) {
    let sign = if w.length().is_multiple_of(2) { 1 } else { -1 };
    (sign, w.reversed_negated())
}

pub fn antipode_sum(s: &ExpSum) -> ExpSum {
    let mut out = ExpSum::scalar(s.constant());
    for (w, c) in s.terms() {
        let (sign, v) = antipode(w);
        out.add_word(v, c * sign as f64);
    }
    out
}

/// Value on the constant loop: length-0 words give 1, longer words 0.
pub fn counit(s: &ExpSum) -> Complex64 {
    s.constant() + s.terms().filter(|(w, _)| w.length() == 0).map(|(_, c)| c).sum::<Complex64>()
}

pub fn counit_word(w: &ExpWord) -> Complex64 {
    if w.length() == 0 {
        ONE
    } else {
        ZERO
    }
}

/// `sum c (x (x) y) -> sum c x y` after applying `f` to the right factor;
/// used for the numeric antipode law.
pub fn left_times_antipode_right(t: &TensorSum) -> Vec<(ExpWord, ExpWord, Complex64)> {
    t.terms()
        .map(|(l, r, c)| {
            let (sign, v) = antipode(r);
            (l.clone(), v, c * sign as f64)
        })
        .collect()
}

/// Product in the algebra of exponential iterated integrals with exponents
/// in a fixed module. Results of word-by-word products are memoized.
#[derive(Debug)]
pub struct Algebra {
    module: FormModule,
    memo: RwLock<HashMap<(ExpWord, ExpWord), ExpSum>>,
}

impl Algebra {
    pub fn new(module: FormModule) -> Self {
        Algebra {
            module,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn module(&self) -> &FormModule {
        &self.module
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().unwrap().len()
    }

    fn check(&self, w: &ExpWord) -> Result<()> {
        for e in w.exponents() {
            if let Some(bad) = e.symbols().find(|id| !self.module.is_generator(id)) {
                return Err(Error::ModuleClosure(bad.to_string()));
            }
        }
        Ok(())
    }

    pub fn product(&self, a: &ExpSum, b: &ExpSum) -> Result<ExpSum> {
        let mut out = ExpSum::zero();
        for (x, cx) in a.all_terms() {
            for (y, cy) in b.all_terms() {
                out = out.add(&self.product_words(&x, &y)?.scale(cx * cy));
            }
        }
        Ok(out)
    }

    pub fn product_words(&self, a: &ExpWord, b: &ExpWord) -> Result<ExpSum> {
        self.check(a)?;
        self.check(b)?;
        self.mul(a, b)
    }

    fn mul(&self, a: &ExpWord, b: &ExpWord) -> Result<ExpSum> {
        if a.is_unit() {
            return Ok(ExpSum::word(b.clone()));
        }
        if b.is_unit() {
            return Ok(ExpSum::word(a.clone()));
        }
        let key = (a.clone(), b.clone());
        if let Some(hit) = self.memo.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let out = match (a.length(), b.length()) {
            (0, 0) => ExpSum::word(ExpWord::exponential(a.exponents()[0].add(&b.exponents()[0]))),
            (0, _) => self.mul(b, a)?,
            (n, _) => {
                // A = A' nu e^{a_n}; B deconcatenated at each exponent.
                let head = a.prefix(n - 1);
                let nu = &a.linears()[n - 1];
                let tail = ExpWord::exponential(a.exponents()[n].clone());
                let mut acc = ExpSum::zero();
                for k in 0..b.exponents().len() {
                    let left = self.mul(&head, &b.prefix(k))?;
                    let right = self.mul(&tail, &b.suffix(k))?;
                    acc = acc.add(&join(&left, nu, &right));
                }
                acc
            }
        };
        self.memo.write().unwrap().insert(key, out.clone());
        Ok(out)
    }
}

/// Bilinear extension of `x nu y` (constants act as the unit word).
pub fn join(left: &ExpSum, nu: &FormId, right: &ExpSum) -> ExpSum {
    let mut out = ExpSum::zero();
    for (x, cx) in left.all_terms() {
        for (y, cy) in right.all_terms() {
            out.add_word(x.join(nu, &y), cx * cy);
        }
    }
    out
}

/// A word times the boundary factor `exp(end(lambda(1)) - start(lambda(0)))`.
#[derive(Debug, Clone)]
pub struct ReducedWord {
    pub word: ExpWord,
    pub start_potential: Expr,
    pub end_potential: Expr,
}

impl ReducedWord {
    pub fn plain(word: ExpWord) -> Self {
        ReducedWord {
            word,
            start_potential: Expr::zero(),
            end_potential: Expr::zero(),
        }
    }

    pub fn boundary_factor(&self, path: &Path) -> Result<Complex64> {
        let a = self.start_potential.eval_finite(&path.start())?;
        let b = self.end_potential.eval_finite(&path.end())?;
        Ok((b - a).exp())
    }

    pub fn evaluate(&self, ev: &Evaluator, path: &Path) -> Result<Complex64> {
        let factor = self.boundary_factor(path)?;
        let v = if self.word.is_unit() {
            ONE
        } else {
            ev.exp_integral(&self.word, path)?
        };
        Ok(factor * v)
    }

    /// Further reduction at exponent `position`, with `dg` equal to that exponent.
    pub fn reduce(&self, table: &mut FormTable, position: usize, g: &Expr) -> Result<ReducedWord> {
        let mut out = exact_exponent_reduce(table, &self.word, position, g)?;
        out.start_potential = self.start_potential.clone() + out.start_potential;
        out.end_potential = self.end_potential.clone() + out.end_potential;
        Ok(out)
    }
}

fn twisted_form(table: &mut FormTable, base: &FormId, g: &Expr, sign: f64) -> Result<FormId> {
    let form = table.get(base)?.clone();
    let factor = (g.clone() * Expr::real(sign)).exp();
    let coefficients = form.coefficients.iter().map(|c| factor.clone() * c.clone()).collect();
    let name = format!("{base}[{}{g}]", if sign < 0.0 { "-" } else { "+" });
    table.insert(OneForm::new(&name, coefficients, false))
}

/// Checks `exponent = dg` at a few points near the basepoint.
fn check_exact(table: &FormTable, exponent: &Exponent, g: &Expr) -> Result<()> {
    let domain = table.domain();
    let d = domain.dim();
    let grad: Vec<Expr> = (0..d).map(|j| g.diff(j)).collect();
    let offsets = [0.0, 0.013, -0.021, 0.034];
    let mut checked = 0;
    for (k, off) in offsets.iter().enumerate() {
        let point: Vec<Complex64> = domain
            .basepoint()
            .iter()
            .enumerate()
            .map(|(j, b)| b + Complex64::new(*off, off * (j as f64 + k as f64) * 0.5))
            .collect();
        if !domain.contains(&point) {
            continue;
        }
        for j in 0..d {
            let mut lhs = ZERO;
            for (id, c) in exponent.terms() {
                lhs += table.get(id)?.coefficients[j].eval_finite(&point)? * c as f64;
            }
            let rhs = grad[j].eval_finite(&point)?;
            if (lhs - rhs).norm() > 1e-9 * (1.0 + lhs.norm()) {
                return Err(Error::NotExact(format!(
                    "exponent {exponent} differs from d({g}) at {point:?}"
                )));
            }
        }
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::NotExact("no sample point near the basepoint".into()));
    }
    Ok(())
}

/// Removes the exponent `dg` at `position` (0-based): the neighbouring linear
/// forms become `e^{-g} w` on the left and `e^{g} w` on the right; an exponent
/// at either end contributes a boundary factor instead. New forms are
/// registered in `table`.
pub fn exact_exponent_reduce(table: &mut FormTable, w: &ExpWord, position: usize, g: &Expr) -> Result<ReducedWord> {
    let n = w.exponents().len();
    if position >= n {
        return Err(Error::Position { pos: position, len: n });
    }
    let exponent = &w.exponents()[position];
    if g.is_zero() && exponent.is_zero() {
        return Ok(ReducedWord::plain(w.clone()));
    }
    check_exact(table, exponent, g)?;
    let mut word = w.with_exponent(position, Exponent::zero());
    let mut start = Expr::zero();
    let mut end = Expr::zero();
    if position == 0 {
        start = g.clone();
    } else {
        let left = twisted_form(table, &w.linears()[position - 1], g, -1.0)?;
        word = word.with_linear(position - 1, left);
    }
    if position == n - 1 {
        end = g.clone();
    } else {
        let right = twisted_form(table, &w.linears()[position], g, 1.0)?;
        word = word.with_linear(position, right);
    }
    Ok(ReducedWord {
        word,
        start_potential: start,
        end_potential: end,
    })
}

impl Evaluator {
    /// `<s, path>`, the linear extension of [`Evaluator::exp_integral`].
    pub fn evaluate(&self, s: &ExpSum, path: &Path) -> Result<Complex64> {
        let mut acc = s.constant();
        for (w, c) in s.terms() {
            acc += self.exp_integral(w, path)? * c;
        }
        Ok(acc)
    }

    pub fn evaluate_word(&self, w: &ExpWord, path: &Path) -> Result<Complex64> {
        if w.is_unit() {
            return Ok(ONE);
        }
        self.exp_integral(w, path)
    }

    /// `<t, (alpha, beta)> = sum c <l, alpha> <r, beta>`.
    pub fn evaluate_tensor(&self, t: &TensorSum, alpha: &Path, beta: &Path) -> Result<Complex64> {
        let mut acc = ZERO;
        for (l, r, c) in t.terms() {
            acc += self.evaluate_word(l, alpha)? * self.evaluate_word(r, beta)? * c;
        }
        Ok(acc)
    }

    /// Evaluates every sum on every path; distinct words are integrated
    /// once per path and in parallel. Output is `[sum][path]`.
    pub fn evaluate_many(&self, sums: &[ExpSum], paths: &[Path]) -> Result<Vec<Vec<Complex64>>> {
        let words: Vec<ExpWord> = sums
            .iter()
            .flat_map(|s| s.terms().map(|(w, _)| w.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let jobs: Vec<(usize, usize)> = (0..words.len())
            .flat_map(|w| (0..paths.len()).map(move |p| (w, p)))
            .collect();
        let values: Vec<Complex64> = jobs
            .par_iter()
            .map(|&(w, p)| self.exp_integral(&words[w], &paths[p]))
            .collect::<Result<_>>()?;
        let index: HashMap<&ExpWord, usize> = words.iter().enumerate().map(|(k, w)| (w, k)).collect();
        Ok(sums
            .iter()
            .map(|s| {
                (0..paths.len())
                    .map(|p| {
                        s.terms().fold(s.constant(), |acc, (w, c)| {
                            acc + values[index[w] * paths.len() + p] * c
                        })
                    })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::transport::Settings;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn w(s: &str) -> ExpWord {
        ExpWord::parse(s).unwrap()
    }

    fn plane() -> FormTable {
        let domain = Domain::new(&["x", "y"], None, vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let mut t = FormTable::new(domain);
        t.define("a", &["1", "0"], true).unwrap();
        t.define("b", &["y", "x"], true).unwrap();
        t.define("u", &["x", "1"], false).unwrap();
        t.define("v", &["y^2", "x"], false).unwrap();
        t
    }

    #[test]
    fn parse_and_display_round_trip() {
        for src in [
            "1",
            "e{a}",
            "e{a} u e{b}",
            "u v",
            "2*u - 0.5i*e{a-2*b} v + (1-2i)*u e{b}",
            "-e{-a}",
        ] {
            let s = ExpSum::parse(src).unwrap();
            let again = ExpSum::parse(&s.to_string()).unwrap();
            assert_eq!(s, again, "{src} -> {s}");
        }
        assert_eq!(ExpSum::parse("e{0}").unwrap(), ExpSum::one());
        assert_eq!(ExpSum::parse("3").unwrap(), ExpSum::scalar(c(3.0, 0.0)));
        assert_eq!(ExpSum::parse("u - u").unwrap(), ExpSum::zero());
        assert_eq!(w("e{2a} u").exponents()[0], Exponent::scaled("a", 2));
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert!(matches!(ExpSum::parse("e{a} e{b}"), Err(Error::Parse { pos: 5, .. })));
        assert!(matches!(ExpSum::parse(""), Err(Error::Parse { .. })));
        assert!(matches!(ExpSum::parse("u +"), Err(Error::Parse { .. })));
        assert!(matches!(ExpSum::parse("e{a"), Err(Error::Parse { .. })));
        assert!(matches!(ExpSum::parse("u $"), Err(Error::Parse { pos: 2, .. })));
        assert!(ExpWord::parse("u + v").is_err());
    }

    #[test]
    fn coproduct_examples() {
        let d = coproduct(&w("e{a}"));
        assert_eq!(d.len(), 1);
        let (l, r, k) = d.terms().next().unwrap();
        assert_eq!((l, r, k), (&w("e{a}"), &w("e{a}"), ONE));
        let d = coproduct(&w("e{a} u e{b}"));
        let terms: Vec<_> = d.terms().map(|(l, r, _)| (l.to_string(), r.to_string())).collect();
        assert!(terms.contains(&("e{a}".into(), "e{a} u e{b}".into())));
        assert!(terms.contains(&("e{a} u e{b}".into(), "e{b}".into())));
        assert_eq!(terms.len(), 2);
    }

    #[test]
    fn coassociativity_is_exact() {
        for src in ["e{a}", "u", "e{a} u e{b} v e{-a}", "u v u"] {
            let d = coproduct(&w(src));
            assert_eq!(d.coproduct_left(), d.coproduct_right(), "{src}");
        }
    }

    #[test]
    fn antipode_and_counit_examples() {
        assert_eq!(antipode(&w("e{a}")), (1, w("e{-a}")));
        assert_eq!(antipode(&w("e{a} u e{b}")), (-1, w("e{-b} u e{-a}")));
        assert_eq!(counit(&ExpSum::parse("e{a}").unwrap()), ONE);
        assert_eq!(counit(&ExpSum::parse("e{a} u e{b}").unwrap()), ZERO);
        assert_eq!(counit(&ExpSum::parse("2 + 3*e{a} + u").unwrap()), c(5.0, 0.0));
    }

    #[test]
    fn base_case_and_unit_products() {
        let t = plane();
        let alg = Algebra::new(FormModule::new("L", vec!["a".into(), "b".into()], &t).unwrap());
        let p = alg.product_words(&w("e{a}"), &w("e{b}")).unwrap();
        assert_eq!(p, ExpSum::parse("e{a+b}").unwrap());
        let p = alg.product_words(&w("e{a}"), &w("e{-a}")).unwrap();
        assert_eq!(p, ExpSum::one());
        let x = ExpSum::parse("e{a} u e{b}").unwrap();
        assert_eq!(alg.product(&ExpSum::one(), &x).unwrap(), x);
        let shuffle = alg.product_words(&w("u"), &w("v")).unwrap();
        assert_eq!(shuffle, ExpSum::parse("u v + v u").unwrap());
        assert!(matches!(
            alg.product_words(&w("e{u}"), &w("e{a}")),
            Err(Error::ModuleClosure(_))
        ));
    }

    #[test]
    fn product_is_multiplicative_numerically() {
        let t = plane();
        let alg = Algebra::new(FormModule::new("L", vec!["a".into(), "b".into()], &t).unwrap());
        let ev = Evaluator::new(t, Settings::default());
        let path = Path::from_exprs(&["0.3*s + 0.2*i*s^2", "0.5*s^3 - 0.1*i*s"]).unwrap();
        let x = ExpSum::parse("e{a} u e{b}").unwrap();
        let y = ExpSum::parse("e{-b} v e{a} u").unwrap();
        let prod = alg.product(&x, &y).unwrap();
        assert!(prod.length() <= x.length() + y.length());
        let lhs = ev.evaluate(&prod, &path).unwrap();
        let rhs = ev.evaluate(&x, &path).unwrap() * ev.evaluate(&y, &path).unwrap();
        assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
        assert!(alg.memo_len() > 0);
    }

    #[test]
    fn reduction_with_zero_potential_is_identity() {
        let mut t = plane();
        let word = w("u e{0} v");
        let r = exact_exponent_reduce(&mut t, &word, 1, &Expr::zero()).unwrap();
        assert_eq!(r.word, word);
        assert!(matches!(
            exact_exponent_reduce(&mut t, &word, 3, &Expr::zero()),
            Err(Error::Position { pos: 3, len: 3 })
        ));
    }

    #[test]
    fn interior_and_boundary_reductions_agree_numerically() {
        let mut t = plane();
        let g = Expr::parse("x", &["x", "y"]).unwrap();
        let path = Path::from_exprs(&["0.4*s + 0.3*i*s^2", "s - 0.2*i*s^3"]).unwrap();
        for (src, pos) in [("u e{a} v", 1), ("e{a} u v", 0), ("u v e{a}", 2), ("e{a}", 0)] {
            let word = w(src);
            let r = exact_exponent_reduce(&mut t, &word, pos, &g).unwrap();
            let ev = Evaluator::new(t.clone(), Settings::default());
            let lhs = ev.evaluate_word(&word, &path).unwrap();
            let rhs = r.evaluate(&ev, &path).unwrap();
            assert!((lhs - rhs).norm() < 1e-8, "{src}: {lhs} vs {rhs}");
        }
        let bad = exact_exponent_reduce(&mut t, &w("u e{b} v"), 1, &g);
        assert!(matches!(bad, Err(Error::NotExact(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = ExpSum::parse("2 + (1-2i)*e{a} u e{b} - v").unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: ExpSum = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}

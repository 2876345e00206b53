//! Formal exponential words `e^{d_1} w_12 e^{d_2} ... w_(n-1)n e^{d_n}`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::FormId;

/// A formal integer combination of form symbols, used as an exponent.
/// Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(BTreeMap<FormId, i64>);

impl Exponent {
    pub fn zero() -> Self {
        Exponent(BTreeMap::new())
    }

    pub fn single(id: impl Into<FormId>) -> Self {
        Exponent::scaled(id, 1)
    }

    pub fn scaled(id: impl Into<FormId>, k: i64) -> Self {
        let mut map = BTreeMap::new();
        if k != 0 {
            map.insert(id.into(), k);
        }
        Exponent(map)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FormId, i64)> {
        self.0.iter().map(|(id, k)| (id, *k))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FormId> {
        self.0.keys()
    }

    pub fn coefficient(&self, id: &FormId) -> i64 {
        self.0.get(id).copied().unwrap_or(0)
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        let mut map = self.0.clone();
        for (id, k) in &other.0 {
            let e = map.entry(id.clone()).or_insert(0);
            *e += k;
            if *e == 0 {
                map.remove(id);
            }
        }
        Exponent(map)
    }

    pub fn neg(&self) -> Exponent {
        Exponent(self.0.iter().map(|(id, k)| (id.clone(), -k)).collect())
    }

    pub fn scale(&self, k: i64) -> Exponent {
        if k == 0 {
            return Exponent::zero();
        }
        Exponent(self.0.iter().map(|(id, c)| (id.clone(), c * k)).collect())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        for (n, (id, k)) in self.0.iter().enumerate() {
            match (n, *k) {
                (0, 1) => write!(f, "{id}")?,
                (0, -1) => write!(f, "-{id}")?,
                (0, k) => write!(f, "{k}*{id}")?,
                (_, 1) => write!(f, "+{id}")?,
                (_, -1) => write!(f, "-{id}")?,
                (_, k) if k > 0 => write!(f, "+{k}*{id}")?,
                (_, k) => write!(f, "{k}*{id}")?,
            }
        }
        Ok(())
    }
}

/// `e^{d_1} w_12 e^{d_2} ... w_(n-1)n e^{d_n}` with `n >= 1` exponents and
/// `n - 1` linear forms. The length is the number of linear forms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpWord {
    exponents: Vec<Exponent>,
    linears: Vec<FormId>,
}

impl ExpWord {
    pub fn new(exponents: Vec<Exponent>, linears: Vec<FormId>) -> Result<Self> {
        if exponents.len() != linears.len() + 1 {
            return Err(Error::MalformedWord(format!(
                "{} exponents for {} linear forms",
                exponents.len(),
                linears.len()
            )));
        }
        Ok(ExpWord { exponents, linears })
    }

    /// `int e^0 = 1`.
    pub fn unit() -> Self {
        ExpWord {
            exponents: vec![Exponent::zero()],
            linears: Vec::new(),
        }
    }

    /// `int e^delta`.
    pub fn exponential(delta: Exponent) -> Self {
        ExpWord {
            exponents: vec![delta],
            linears: Vec::new(),
        }
    }

    /// The ordinary iterated integral `int w_1 ... w_n`.
    pub fn ordinary(forms: &[FormId]) -> Self {
        ExpWord {
            exponents: vec![Exponent::zero(); forms.len() + 1],
            linears: forms.to_vec(),
        }
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    pub fn linears(&self) -> &[FormId] {
        &self.linears
    }

    pub fn length(&self) -> usize {
        self.linears.len()
    }

    pub fn is_unit(&self) -> bool {
        self.linears.is_empty() && self.exponents[0].is_zero()
    }

    pub fn is_ordinary(&self) -> bool {
        self.exponents.iter().all(Exponent::is_zero)
    }

    /// Prefix `e^{d_1} ... e^{d_k}` through exponent index `k` (0-based).
    pub fn prefix(&self, k: usize) -> ExpWord {
        ExpWord {
            exponents: self.exponents[..=k].to_vec(),
            linears: self.linears[..k].to_vec(),
        }
    }

    /// Suffix `e^{d_k} ... e^{d_n}` from exponent index `k` (0-based).
    pub fn suffix(&self, k: usize) -> ExpWord {
        ExpWord {
            exponents: self.exponents[k..].to_vec(),
            linears: self.linears[k..].to_vec(),
        }
    }

    /// `self` and `other` joined by the linear form `w`.
    pub fn join(&self, w: &FormId, other: &ExpWord) -> ExpWord {
        let mut exponents = self.exponents.clone();
        exponents.extend(other.exponents.iter().cloned());
        let mut linears = self.linears.clone();
        linears.push(w.clone());
        linears.extend(other.linears.iter().cloned());
        ExpWord { exponents, linears }
    }

    /// Reversed word with negated exponents (the linear forms keep their sign).
    pub fn reversed_negated(&self) -> ExpWord {
        ExpWord {
            exponents: self.exponents.iter().rev().map(Exponent::neg).collect(),
            linears: self.linears.iter().rev().cloned().collect(),
        }
    }

    pub fn with_exponent(&self, k: usize, e: Exponent) -> ExpWord {
        let mut w = self.clone();
        w.exponents[k] = e;
        w
    }

    pub fn with_linear(&self, k: usize, id: FormId) -> ExpWord {
        let mut w = self.clone();
        w.linears[k] = id;
        w
    }

    /// Every form symbol the word mentions.
    pub fn symbols(&self) -> impl Iterator<Item = &FormId> {
        self.exponents
            .iter()
            .flat_map(Exponent::symbols)
            .chain(self.linears.iter())
    }
}

impl fmt::Display for ExpWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            return f.write_str("1");
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !std::mem::take(&mut first) {
                f.write_str(" ")?;
            }
            Ok(())
        };
        for (k, e) in self.exponents.iter().enumerate() {
            if !e.is_zero() {
                sep(f)?;
                write!(f, "e{{{e}}}")?;
            }
            if let Some(w) = self.linears.get(k) {
                sep(f)?;
                write!(f, "{w}")?;
            }
        }
        Ok(())
    }
}

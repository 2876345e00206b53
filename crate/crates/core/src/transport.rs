//! Numerical evaluation of iterated and exponential iterated integrals.
//!
//! Sections are row vectors, so for a connection `d - w` the transport
//! `T(t)` along a path solves `T' = T F` with `T(0) = I`, where
//! `F(t) dt` is the pullback of the connection matrix. With this side
//! convention `T(ab) = T(a) T(b)` holds literally and
//! `T = I + int w + int w w + ...`.
//!
//! Three independent routes are provided:
//!
//! * [`Evaluator::transport_ode`] and everything built on it (ordinary and
//!   exponential iterated integrals as matrix entries of an upper-triangular
//!   transport), integrated with adaptive Dormand-Prince 5(4);
//! * [`Evaluator::exp_series_truncated`], which sums the defining series of an
//!   exponential word by total exponent degree, carried out as a transport
//!   with values in the truncated polynomial ring `C[z]/(z^(m+1))`;
//! * [`Evaluator::iterated_integral_quadrature`], composite Gauss-Legendre
//!   quadrature over the ordered simplex, used as a test oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FormId, FormTable, Path, Side};
use crate::hopf::ExpSum;
use crate::ode;
use crate::quadrature::Rule;
use crate::word::{ExpWord, Exponent};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEGREE: usize = 25;
pub const DEFAULT_SUBDIVISIONS: usize = 64;
/// The simplex oracle's cost grows as `subdivisions^n`.
pub const ORACLE_MAX_FORMS: usize = 4;
/// Grid size for the series tail-bound constant.
pub const TAIL_GRID: usize = 512;
/// Gauss-Legendre nodes per quadrature panel.
pub const PANEL_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub tol: f64,
    pub max_degree: usize,
    pub subdivisions: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: DEFAULT_TOL,
            max_degree: DEFAULT_MAX_DEGREE,
            subdivisions: DEFAULT_SUBDIVISIONS,
        }
    }
}

/// Upper-triangular connection matrix: diagonal exponents (formal integer
/// combinations of forms) and optional strictly-upper form entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    size: usize,
    diagonal: Vec<Exponent>,
    upper: BTreeMap<(usize, usize), FormId>,
}

impl Connection {
    pub fn zero(size: usize) -> Self {
        Connection {
            size,
            diagonal: vec![Exponent::zero(); size],
            upper: BTreeMap::new(),
        }
    }

    /// The superdiagonal connection of an exponential word.
    pub fn superdiagonal(word: &ExpWord) -> Self {
        let mut c = Connection::zero(word.exponents().len());
        c.diagonal = word.exponents().to_vec();
        for (k, w) in word.linears().iter().enumerate() {
            c.upper.insert((k, k + 1), w.clone());
        }
        c
    }

    /// The nilpotent chain connection whose corner entry is `int w_1 ... w_n`.
    pub fn nilpotent_chain(forms: &[FormId]) -> Self {
        Connection::superdiagonal(&ExpWord::ordinary(forms))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn set_diagonal(&mut self, k: usize, e: Exponent) -> Result<()> {
        if k >= self.size {
            return Err(Error::InvalidConnection(format!("diagonal index {k} out of range")));
        }
        self.diagonal[k] = e;
        Ok(())
    }

    pub fn set_upper(&mut self, i: usize, j: usize, form: FormId) -> Result<()> {
        if i >= j {
            return Err(Error::InvalidConnection(format!(
                "entry ({i}, {j}) is not strictly upper triangular"
            )));
        }
        if j >= self.size {
            return Err(Error::InvalidConnection(format!("entry ({i}, {j}) out of range")));
        }
        self.upper.insert((i, j), form);
        Ok(())
    }

    pub fn diagonal(&self, k: usize) -> &Exponent {
        &self.diagonal[k]
    }

    pub fn upper(&self, i: usize, j: usize) -> Option<&FormId> {
        self.upper.get(&(i, j))
    }

    pub fn upper_entries(&self) -> impl Iterator<Item = ((usize, usize), &FormId)> {
        self.upper.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_nilpotent(&self) -> bool {
        self.diagonal.iter().all(Exponent::is_zero)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FormId> {
        self.diagonal
            .iter()
            .flat_map(Exponent::symbols)
            .chain(self.upper.values())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub matrix: DMatrix<Complex64>,
    pub method: Method,
    pub est_error: f64,
    /// Accepted ODE steps, or series terms summed.
    pub steps: usize,
}

/// A scalar value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: Complex64,
    pub method: Method,
    pub est_error: f64,
    pub steps: usize,
}

/// Forms pulled back together at one parameter value.
struct PulledBack {
    ids: Vec<FormId>,
}

impl PulledBack {
    fn new<'a>(symbols: impl Iterator<Item = &'a FormId>) -> Self {
        let mut ids: Vec<FormId> = symbols.cloned().collect();
        ids.sort();
        ids.dedup();
        PulledBack { ids }
    }

    fn index(&self, id: &FormId) -> usize {
        self.ids.binary_search(id).expect("symbol registered")
    }

    fn combo(&self, e: &Exponent) -> Vec<(usize, f64)> {
        e.terms().map(|(id, k)| (self.index(id), k as f64)).collect()
    }

    fn eval(&self, table: &FormTable, path: &Path, t: f64, side: Side, out: &mut [Complex64]) -> Result<()> {
        let jet = path.jet(t, side);
        table.domain().check(&jet.point)?;
        for (slot, id) in out.iter_mut().zip(&self.ids) {
            *slot = table.pair(id, &jet)?;
        }
        Ok(())
    }
}

fn combine(values: &[Complex64], combo: &[(usize, f64)]) -> Complex64 {
    combo
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, (i, k)| acc + values[*i] * *k)
}

/// Numerical evaluator bound to a form table and solver settings.
#[derive(Debug, Clone)]
pub struct Evaluator {
    table: Arc<FormTable>,
    settings: Settings,
}

impl Evaluator {
    pub fn new(table: FormTable, settings: Settings) -> Self {
        Evaluator {
            table: Arc::new(table),
            settings,
        }
    }

    pub fn from_shared(table: Arc<FormTable>, settings: Settings) -> Self {
        Evaluator { table, settings }
    }

    pub fn table(&self) -> &FormTable {
        &self.table
    }

    pub fn shared_table(&self) -> Arc<FormTable> {
        self.table.clone()
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn with_settings(&self, settings: Settings) -> Self {
        Evaluator {
            table: self.table.clone(),
            settings,
        }
    }

    pub fn with_table(&self, table: FormTable) -> Self {
        Evaluator::new(table, self.settings)
    }

    fn check_symbols<'a>(&self, mut symbols: impl Iterator<Item = &'a FormId>) -> Result<()> {
        match symbols.find(|id| !self.table.contains(id)) {
            Some(id) => Err(Error::UnknownName(id.to_string())),
            None => Ok(()),
        }
    }

    fn check_path(&self, path: &Path) -> Result<()> {
        if path.dim() != self.table.domain().dim() {
            return Err(Error::Dimension {
                expected: self.table.domain().dim(),
                got: path.dim(),
            });
        }
        Ok(())
    }

    /// Integrates `rows` leading rows of the transport of `conn` along `path`.
    fn transport_rows(&self, conn: &Connection, path: &Path, rows: usize, tol: f64) -> Result<(Vec<Complex64>, ode::OdeStats)> {
        self.check_symbols(conn.symbols())?;
        self.check_path(path)?;
        let n = conn.size();
        let forms = PulledBack::new(conn.symbols());
        let diag: Vec<Vec<(usize, f64)>> = (0..n).map(|k| forms.combo(conn.diagonal(k))).collect();
        // entries grouped by column: (row j, form index)
        let mut by_col: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for ((j, k), id) in conn.upper_entries() {
            by_col[k].push((j, forms.index(id)));
        }
        let mut y = vec![Complex64::new(0.0, 0.0); rows * n];
        for i in 0..rows {
            y[i * n + i] = Complex64::new(1.0, 0.0);
        }
        let mut values = vec![Complex64::new(0.0, 0.0); forms.ids.len()];
        let table = &self.table;
        let stats = ode::integrate(&mut y, &path.pieces(), tol, |t, side, y, dy| {
            forms.eval(table, path, t, side, &mut values)?;
            let dvals: Vec<Complex64> = diag.iter().map(|c| combine(&values, c)).collect();
            for i in 0..rows {
                let row = &y[i * n..(i + 1) * n];
                for k in 0..n {
                    let mut acc = row[k] * dvals[k];
                    for (j, f) in &by_col[k] {
                        acc += row[*j] * values[*f];
                    }
                    dy[i * n + k] = acc;
                }
            }
            Ok(())
        })?;
        Ok((y, stats))
    }

    /// Transport matrix of `d - conn` along `path` at the evaluator's tolerance.
    pub fn transport_ode(&self, conn: &Connection, path: &Path) -> Result<TransportResult> {
        self.transport_ode_tol(conn, path, self.settings.tol)
    }

    pub fn transport_ode_tol(&self, conn: &Connection, path: &Path, tol: f64) -> Result<TransportResult> {
        let n = conn.size();
        let (y, stats) = self.transport_rows(conn, path, n, tol)?;
        Ok(TransportResult {
            matrix: DMatrix::from_row_slice(n, n, &y),
            method: Method::Ode,
            est_error: stats.error,
            steps: stats.steps,
        })
    }

    /// `int_path e^{d_1} w_12 ... e^{d_n}` as the corner entry of the
    /// superdiagonal transport (only its first row is integrated).
    pub fn exp_integral_detailed(&self, word: &ExpWord, path: &Path) -> Result<Evaluation> {
        let conn = Connection::superdiagonal(word);
        let n = conn.size();
        let (y, stats) = self.transport_rows(&conn, path, 1, self.settings.tol)?;
        Ok(Evaluation {
            value: y[n - 1],
            method: Method::Ode,
            est_error: stats.error,
            steps: stats.steps,
        })
    }

    pub fn exp_integral(&self, word: &ExpWord, path: &Path) -> Result<Complex64> {
        Ok(self.exp_integral_detailed(word, path)?.value)
    }

    /// `int_path w_1 ... w_n` through the nilpotent chain connection.
    pub fn iterated_integral(&self, forms: &[FormId], path: &Path) -> Result<Complex64> {
        if forms.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.exp_integral(&ExpWord::ordinary(forms), path)
    }

    /// Composite Gauss-Legendre quadrature of the ordered-simplex integral,
    /// integrating the innermost variable first. Panels follow the path's
    /// breakpoints, `subdivisions` per unit parameter.
    pub fn iterated_integral_quadrature(&self, forms: &[FormId], path: &Path, subdivisions: usize) -> Result<Complex64> {
        if forms.len() > ORACLE_MAX_FORMS {
            return Err(Error::UnsupportedOracle {
                max: ORACLE_MAX_FORMS,
                got: forms.len(),
            });
        }
        if forms.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.check_symbols(forms.iter())?;
        self.check_path(path)?;
        let mut panels = Vec::new();
        for (a, b) in path.pieces() {
            let count = ((b - a) * subdivisions.max(1) as f64).ceil().max(1.0) as usize;
            for k in 0..count {
                panels.push((a + (b - a) * k as f64 / count as f64, a + (b - a) * (k + 1) as f64 / count as f64));
            }
        }
        let oracle = SimplexOracle {
            table: &self.table,
            path,
            forms,
            panels: &panels,
            rule: Rule::new(PANEL_NODES),
        };
        let mut cumulative: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0); panels.len() + 1]];
        for level in 1..=forms.len() {
            let mut acc = vec![Complex64::new(0.0, 0.0); panels.len() + 1];
            for (j, &(a, b)) in panels.iter().enumerate() {
                acc[j + 1] = acc[j] + oracle.partial(&cumulative, level, j, a, b)?;
            }
            cumulative.push(acc);
        }
        Ok(cumulative[forms.len()][panels.len()])
    }

    /// Partial sum of the defining series of `word` over total exponent
    /// degree `<= m`, with the factorial tail bound `sum_{k > m} C^k / k!`.
    pub fn exp_series_truncated(&self, word: &ExpWord, path: &Path, m: usize) -> Result<(Complex64, f64)> {
        let sums = self.exp_series_partial_sums(word, path, m)?;
        let tail = self.series_tail_bound(word, path, m)?;
        Ok((sums[m], tail))
    }

    /// Partial sums `S_0, ..., S_m` of the series by total exponent degree.
    pub fn exp_series_partial_sums(&self, word: &ExpWord, path: &Path, m: usize) -> Result<Vec<Complex64>> {
        let coeffs = self.exp_series_graded(word, path, m)?;
        let mut acc = Complex64::new(0.0, 0.0);
        Ok(coeffs
            .into_iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect())
    }

    /// Degree-`d` pieces `sum_{m_1 + ... + m_n = d} int d_1^{m_1} w_12 ... d_n^{m_n}`
    /// for `d = 0..=m`, from the transport of `N + z D` over `C[z]/(z^(m+1))`.
    pub fn exp_series_graded(&self, word: &ExpWord, path: &Path, m: usize) -> Result<Vec<Complex64>> {
        self.check_symbols(word.symbols())?;
        self.check_path(path)?;
        let n = word.exponents().len();
        let width = m + 1;
        let forms = PulledBack::new(word.symbols());
        let diag: Vec<Vec<(usize, f64)>> = word.exponents().iter().map(|e| forms.combo(e)).collect();
        let lin: Vec<usize> = word.linears().iter().map(|w| forms.index(w)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); n * width];
        y[0] = Complex64::new(1.0, 0.0);
        let mut values = vec![Complex64::new(0.0, 0.0); forms.ids.len()];
        let table = &self.table;
        ode::integrate(&mut y, &path.pieces(), self.settings.tol, |t, side, y, dy| {
            forms.eval(table, path, t, side, &mut values)?;
            for j in 0..n {
                let dj = combine(&values, &diag[j]);
                for d in 0..width {
                    let mut acc = Complex64::new(0.0, 0.0);
                    if j > 0 {
                        acc += y[(j - 1) * width + d] * values[lin[j - 1]];
                    }
                    if d > 0 {
                        acc += y[j * width + d - 1] * dj;
                    }
                    dy[j * width + d] = acc;
                }
            }
            Ok(())
        })?;
        Ok(y[(n - 1) * width..].to_vec())
    }

    /// `sum_{k > m} C^k / k!` with `C` = (number of forms in the word) times
    /// the largest pullback magnitude on a uniform grid.
    pub fn series_tail_bound(&self, word: &ExpWord, path: &Path, m: usize) -> Result<f64> {
        let forms = PulledBack::new(word.symbols());
        let combos: Vec<Vec<(usize, f64)>> = word
            .exponents()
            .iter()
            .map(|e| forms.combo(e))
            .chain(word.linears().iter().map(|w| vec![(forms.index(w), 1.0)]))
            .collect();
        let mut values = vec![Complex64::new(0.0, 0.0); forms.ids.len()];
        let mut biggest: f64 = 0.0;
        for k in 0..TAIL_GRID {
            let t = (k as f64 + 0.5) / TAIL_GRID as f64;
            forms.eval(&self.table, path, t, Side::Right, &mut values)?;
            for c in &combos {
                biggest = biggest.max(combine(&values, c).norm());
            }
        }
        let c = combos.len() as f64 * biggest;
        Ok(exp_remainder(c, m))
    }
}

/// `sum_{k > m} c^k / k!`.
pub fn exp_remainder(c: f64, m: usize) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let k0 = m + 1;
    let log_first = k0 as f64 * c.ln() - (1..=k0).map(|j| (j as f64).ln()).sum::<f64>();
    let mut term = log_first.exp();
    let mut sum = 0.0;
    let mut k = k0;
    loop {
        sum += term;
        k += 1;
        term *= c / k as f64;
        if (k as f64) > c && term <= 1e-17 * sum {
            break;
        }
        if !sum.is_finite() {
            return f64::INFINITY;
        }
    }
    sum
}

struct SimplexOracle<'a> {
    table: &'a FormTable,
    path: &'a Path,
    forms: &'a [FormId],
    panels: &'a [(f64, f64)],
    rule: Rule,
}

impl SimplexOracle<'_> {
    /// `G_level(u) = int_0^u G_(level-1)(v) f_level(v) dv` with `u` in panel `j`.
    fn value(&self, cumulative: &[Vec<Complex64>], level: usize, j: usize, u: f64) -> Result<Complex64> {
        if level == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let a = self.panels[j].0;
        Ok(cumulative[level][j] + self.partial(cumulative, level, j, a, u)?)
    }

    /// `int_a^u G_(level-1)(v) f_level(v) dv` inside panel `j`.
    fn partial(&self, cumulative: &[Vec<Complex64>], level: usize, j: usize, a: f64, u: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        if u <= a {
            return Ok(acc);
        }
        let id = &self.forms[level - 1];
        for (v, w) in self.rule.on(a, u) {
            let jet = self.path.jet(v, Side::Right);
            self.table.domain().check(&jet.point)?;
            let f = self.table.pair(id, &jet)?;
            acc += self.value(cumulative, level - 1, j, v)? * f * w;
        }
        Ok(acc)
    }
}

/// Symbolic transport of an upper-triangular connection: entry `(i, j)` is
/// the sum over chains `i = k_1 < ... < k_p = j` of
/// `int e^{w_k1k1} w_k1k2 e^{w_k2k2} ... e^{w_kpkp}`; `None` below the diagonal.
pub fn upper_transport_words(conn: &Connection) -> Vec<Vec<Option<ExpSum>>> {
    let n = conn.size();
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut sum = ExpSum::zero();
            let mut chain = vec![i];
            collect_chains(conn, j, &mut chain, &mut sum);
            out[i][j] = Some(sum);
        }
    }
    out
}

fn collect_chains(conn: &Connection, target: usize, chain: &mut Vec<usize>, sum: &mut ExpSum) {
    let last = *chain.last().unwrap();
    if last == target {
        let exponents = chain.iter().map(|k| conn.diagonal(*k).clone()).collect();
        let linears = chain
            .windows(2)
            .map(|w| conn.upper(w[0], w[1]).cloned().unwrap())
            .collect();
        let word = ExpWord::new(exponents, linears).unwrap();
        sum.add_word(word, Complex64::new(1.0, 0.0));
        return;
    }
    for next in (last + 1)..=target {
        if conn.upper(last, next).is_some() {
            chain.push(next);
            collect_chains(conn, target, chain, sum);
            chain.pop();
        }
    }
}

/// Number of chains `i = k_1 < ... < k_p = j` through nonzero entries.
pub fn chain_count(conn: &Connection, i: usize, j: usize) -> usize {
    if i == j {
        return 1;
    }
    ((i + 1)..=j)
        .filter(|k| conn.upper(i, *k).is_some())
        .map(|k| chain_count(conn, k, j))
        .sum()
}

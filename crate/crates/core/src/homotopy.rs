//! Homotopy experiments: loop words, endpoint-fixing perturbations,
//! closedness probes, characters, monodromy and separation tables.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, Curve, Domain, FormId, Jet, Path, Side, POINT_TOL};
use crate::hopf::ExpSum;
use crate::transport::{Connection, Evaluator};
use crate::word::{ExpWord, Exponent};

/// Two values are separated when they differ by more than this.
pub const SEPARATION_THRESHOLD: f64 = 1e-4;
/// Relative threshold on singular values for the numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-6;
/// Closed integrals must move by less than this (times `max(1, |value|)`).
pub const CLOSEDNESS_THRESHOLD: f64 = 1e-6;
pub const CHARACTER_TOL: f64 = 1e-8;
pub const FLATNESS_TOL: f64 = 1e-7;
pub const MAX_HALVINGS: usize = 8;

/// A loop word: generator names with nonzero integer powers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LoopWord(pub Vec<(String, i32)>);

impl LoopWord {
    /// Parses `a b^-1 c^2`; `1` or the empty string is the trivial word.
    pub fn parse(src: &str) -> Result<LoopWord> {
        let mut letters = Vec::new();
        let mut offset = 0;
        for token in src.split_whitespace() {
            let pos = src[offset..].find(token).map_or(offset, |p| p + offset);
            offset = pos + token.len();
            if token == "1" {
                continue;
            }
            let (name, power) = match token.split_once('^') {
                Some((n, p)) => (
                    n,
                    p.parse::<i32>().map_err(|_| Error::Parse {
                        pos: pos + n.len() + 1,
                        msg: format!("bad power `{p}`"),
                    })?,
                ),
                None => (token, 1),
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    pos,
                    msg: format!("bad generator `{name}`"),
                });
            }
            if power != 0 {
                letters.push((name.to_string(), power));
            }
        }
        Ok(LoopWord(letters))
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> LoopWord {
        LoopWord(self.0.iter().rev().map(|(g, p)| (g.clone(), -p)).collect())
    }

    pub fn concat(&self, other: &LoopWord) -> LoopWord {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        LoopWord(v)
    }

    /// `[u, v] = u v u^-1 v^-1`.
    pub fn commutator(u: &LoopWord, v: &LoopWord) -> LoopWord {
        u.concat(v).concat(&u.inverse()).concat(&v.inverse())
    }

    /// Exponent sum of each generator.
    pub fn abelianization(&self) -> BTreeMap<String, i32> {
        let mut out = BTreeMap::new();
        for (g, p) in &self.0 {
            *out.entry(g.clone()).or_insert(0) += p;
        }
        out.retain(|_, p| *p != 0);
        out
    }
}

impl std::fmt::Display for LoopWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, (g, p)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            match p {
                1 => write!(f, "{g}")?,
                p => write!(f, "{g}^{p}")?,
            }
        }
        Ok(())
    }
}

/// Named generator loops at a common basepoint.
#[derive(Debug, Clone)]
pub struct LoopFamily {
    basepoint: Vec<Complex64>,
    generators: BTreeMap<String, Path>,
}

impl LoopFamily {
    pub fn new(basepoint: Vec<Complex64>) -> Self {
        LoopFamily {
            basepoint,
            generators: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, path: Path) -> Result<()> {
        if path.dim() != self.basepoint.len() {
            return Err(Error::Dimension {
                expected: self.basepoint.len(),
                got: path.dim(),
            });
        }
        if dist(&path.start(), &self.basepoint) > POINT_TOL || dist(&path.end(), &self.basepoint) > POINT_TOL {
            return Err(Error::Composition(format!("generator `{name}` is not a loop at the basepoint")));
        }
        self.generators.insert(name.to_string(), path);
        Ok(())
    }

    pub fn basepoint(&self) -> &[Complex64] {
        &self.basepoint
    }

    pub fn generator(&self, name: &str) -> Result<&Path> {
        self.generators
            .get(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    pub fn compile(&self, word: &LoopWord) -> Result<Path> {
        let mut out: Option<Path> = None;
        for (g, p) in &word.0 {
            let base = self.generator(g)?;
            let piece = if *p > 0 { base.clone() } else { base.inverse() };
            for _ in 0..p.unsigned_abs() {
                out = Some(match out {
                    None => piece.clone(),
                    Some(acc) => acc.concat(&piece)?,
                });
            }
        }
        Ok(out.unwrap_or_else(|| Path::constant(&self.basepoint)))
    }

    pub fn compile_str(&self, word: &str) -> Result<Path> {
        self.compile(&LoopWord::parse(word)?)
    }
}

/// Random endpoint-fixing perturbation
/// `Delta(s) = amplitude * diam * sum_k c_k sin(k pi s) / (k H_K)`, with
/// complex vectors `c_k` in the unit box and `H_K` the harmonic number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    pub frequencies: usize,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            amplitude: 0.05,
            frequencies: 4,
            seed: 0,
        }
    }
}

#[derive(Debug)]
struct Perturbed {
    base: Path,
    coeffs: Vec<Vec<Complex64>>,
    scale: f64,
}

impl Perturbed {
    fn offset(&self, s: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let d = self.base.dim();
        let mut value = vec![Complex64::new(0.0, 0.0); d];
        let mut rate = vec![Complex64::new(0.0, 0.0); d];
        for (k, c) in self.coeffs.iter().enumerate() {
            let w = (k + 1) as f64 * std::f64::consts::PI;
            let (sin, cos) = (w * s).sin_cos();
            for j in 0..d {
                value[j] += c[j] * (self.scale * sin);
                rate[j] += c[j] * (self.scale * w * cos);
            }
        }
        (value, rate)
    }
}

impl Curve for Perturbed {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let mut jet = self.base.jet(s, side);
        let (value, rate) = self.offset(s);
        for j in 0..jet.point.len() {
            jet.point[j] += value[j];
            jet.velocity[j] += rate[j];
        }
        jet
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// The perturbed path of trial `trial`, with the number of amplitude
/// halvings needed to keep the straight-line homotopy inside the domain.
pub fn perturb(path: &Path, domain: &Domain, spec: &PerturbationSpec, trial: u64) -> Result<(Path, usize)> {
    let d = path.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(trial);
    let harmonic: f64 = (1..=spec.frequencies.max(1)).map(|k| 1.0 / k as f64).sum();
    let coeffs: Vec<Vec<Complex64>> = (1..=spec.frequencies)
        .map(|k| {
            (0..d)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (k as f64 * harmonic))
                .collect()
        })
        .collect();
    let mut scale = spec.amplitude * path.diameter();
    let samples = path.sample_params(128);
    for halvings in 0..=MAX_HALVINGS {
        let candidate = Perturbed {
            base: path.clone(),
            coeffs: coeffs.clone(),
            scale,
        };
        let safe = samples.iter().all(|&(s, side)| {
            let point = path.jet(s, side).point;
            let (offset, _) = candidate.offset(s);
            let size = offset.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let moved: Vec<Complex64> = point.iter().zip(&offset).map(|(p, o)| p + o).collect();
            size <= 0.5 * domain.margin(&point) && domain.contains(&moved)
        });
        if safe {
            return Ok((Path::from_curve(candidate), halvings));
        }
        scale *= 0.5;
    }
    Err(Error::Perturbation { halvings: MAX_HALVINGS })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub base_value: Complex64,
    pub max_deviation: f64,
    pub scale: f64,
    pub trials: usize,
    pub max_halvings: usize,
    pub passed: bool,
}

/// Largest change of `<s, path>` over `trials` random endpoint-fixing
/// perturbations. Every exponent of `s` must be a closed-flagged form.
pub fn closedness_probe(ev: &Evaluator, s: &ExpSum, path: &Path, spec: &PerturbationSpec, trials: usize) -> Result<ProbeReport> {
    let mut reports = closedness_probe_many(ev, std::slice::from_ref(s), path, spec, trials)?;
    Ok(reports.remove(0))
}

/// [`closedness_probe`] for several sums at once; words shared between the
/// sums are evaluated once per perturbed path.
pub fn closedness_probe_many(ev: &Evaluator, sums: &[ExpSum], path: &Path, spec: &PerturbationSpec, trials: usize) -> Result<Vec<ProbeReport>> {
    for s in sums {
        for (w, _) in s.terms() {
            for e in w.exponents() {
                for id in e.symbols() {
                    if !ev.table().get(id)?.closed {
                        return Err(Error::NotClosed(id.to_string()));
                    }
                }
            }
        }
    }
    let mut paths = vec![path.clone()];
    let mut halvings = Vec::with_capacity(trials);
    for k in 0..trials {
        let (moved, h) = perturb(path, ev.table().domain(), spec, k as u64)?;
        paths.push(moved);
        halvings.push(h);
    }
    let values = ev.evaluate_many(sums, &paths)?;
    let max_halvings = halvings.iter().copied().max().unwrap_or(0);
    Ok(values
        .iter()
        .map(|row| {
            let base_value = row[0];
            let max_deviation = row[1..].iter().map(|v| (v - base_value).norm()).fold(0.0, f64::max);
            let scale = base_value.norm().max(1.0);
            ProbeReport {
                base_value,
                max_deviation,
                scale,
                trials,
                max_halvings,
                passed: max_deviation < CLOSEDNESS_THRESHOLD * scale,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterReport {
    pub value_a: Complex64,
    pub value_b: Complex64,
    pub value_ab: Complex64,
    pub value_commutator: Complex64,
    pub homomorphism_error: f64,
    pub commutator_error: f64,
    pub passed: bool,
}

/// Checks that `lambda -> <int e^delta, lambda>` is multiplicative on `a, b`
/// and trivial on `[a, b]`.
pub fn character_check(ev: &Evaluator, delta: &FormId, a: &Path, b: &Path) -> Result<CharacterReport> {
    let word = ExpWord::exponential(Exponent::single(delta.clone()));
    let ab = a.concat(b)?;
    let commutator = ab.concat(&a.inverse())?.concat(&b.inverse())?;
    let value_a = ev.exp_integral(&word, a)?;
    let value_b = ev.exp_integral(&word, b)?;
    let value_ab = ev.exp_integral(&word, &ab)?;
    let value_commutator = ev.exp_integral(&word, &commutator)?;
    let homomorphism_error = (value_ab - value_a * value_b).norm();
    let commutator_error = (value_commutator - 1.0).norm();
    Ok(CharacterReport {
        value_a,
        value_b,
        value_ab,
        value_commutator,
        homomorphism_error,
        commutator_error,
        passed: homomorphism_error < CHARACTER_TOL && commutator_error < CHARACTER_TOL,
    })
}

/// Monodromy matrices of a flat connection on loop words. Flatness is
/// probed first: each generator is compared against perturbed copies.
pub fn monodromy(ev: &Evaluator, conn: &Connection, family: &LoopFamily, words: &[LoopWord]) -> Result<BTreeMap<LoopWord, DMatrix<Complex64>>> {
    let spec = PerturbationSpec::default();
    for name in family.names() {
        let g = family.generator(name)?;
        let base = ev.transport_ode(conn, g)?.matrix;
        for trial in 0..3 {
            let (moved, _) = perturb(g, ev.table().domain(), &spec, trial)?;
            let other = ev.transport_ode(conn, &moved)?.matrix;
            let deviation = (other - &base).norm();
            if deviation > FLATNESS_TOL * base.norm().max(1.0) {
                return Err(Error::Flatness { deviation });
            }
        }
    }
    words
        .par_iter()
        .map(|w| Ok((w.clone(), ev.transport_ode(conn, &family.compile(w)?)?.matrix)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub left: String,
    pub right: String,
    pub separated: bool,
    pub max_difference: f64,
    /// Index of the integral with the largest difference.
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub integrals: Vec<String>,
    pub loops: Vec<String>,
    /// `values[i][l]` = integral `i` on loop `l`.
    pub values: Vec<Vec<Complex64>>,
    pub threshold: f64,
    pub pairs: Vec<PairVerdict>,
}

/// Evaluates every integral on every loop and decides, for every pair of
/// loops, whether some integral tells them apart.
pub fn separation_experiment(ev: &Evaluator, integrals: &[ExpSum], family: &LoopFamily, loops: &[LoopWord], threshold: f64) -> Result<SeparationReport> {
    let paths: Vec<Path> = loops.iter().map(|w| family.compile(w)).collect::<Result<_>>()?;
    let values = ev.evaluate_many(integrals, &paths)?;
    let mut pairs = Vec::new();
    for u in 0..loops.len() {
        for v in (u + 1)..loops.len() {
            let (witness, max_difference) = values
                .iter()
                .map(|row| (row[u] - row[v]).norm())
                .enumerate()
                .fold((None, 0.0), |best, (i, d)| if d > best.1 { (Some(i), d) } else { best });
            pairs.push(PairVerdict {
                left: loops[u].to_string(),
                right: loops[v].to_string(),
                separated: max_difference > threshold,
                max_difference,
                witness,
            });
        }
    }
    Ok(SeparationReport {
        integrals: integrals.iter().map(ToString::to_string).collect(),
        loops: loops.iter().map(ToString::to_string).collect(),
        values,
        threshold,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub rank: usize,
    pub words: usize,
    pub loops: usize,
    pub singular_values: Vec<f64>,
    /// `sigma_min / sigma_max` over the first `min(words, loops)` values.
    pub condition_ratio: f64,
    /// Fewer loops than words: full row rank is impossible.
    pub deficient_by_shape: bool,
    pub full_rank: bool,
}

/// Numerical rank of the `words x paths` evaluation matrix.
pub fn independence_check(ev: &Evaluator, words: &[ExpSum], paths: &[Path]) -> Result<IndependenceReport> {
    let values = ev.evaluate_many(words, paths)?;
    Ok(rank_report(&values, words.len(), paths.len()))
}

pub fn rank_report(values: &[Vec<Complex64>], rows: usize, cols: usize) -> IndependenceReport {
    let m = DMatrix::from_fn(rows, cols, |i, j| values[i][j]);
    let mut sv: Vec<f64> = if rows == 0 || cols == 0 {
        Vec::new()
    } else {
        m.singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| top > 0.0 && **s > RANK_THRESHOLD * top).count();
    let condition_ratio = match (sv.first(), sv.last()) {
        (Some(a), Some(b)) if *a > 0.0 => b / a,
        _ => 0.0,
    };
    IndependenceReport {
        rank,
        words: rows,
        loops: cols,
        singular_values: sv,
        condition_ratio,
        deficient_by_shape: cols < rows,
        full_rank: rank == rows && cols >= rows,
    }
}

//! Domains, 1-forms and piecewise-smooth paths.
//!
//! A domain is an affine chart of `C^d` with an optional hypersurface
//! `{p = 0}` removed. Forms are holomorphic covector fields `sum_j f_j dz_j`
//! whose coefficients are [`Expr`]s in the chart coordinates. Paths are maps
//! `[0, 1] -> C^d` that are C^1 away from finitely many breakpoints; at a
//! breakpoint the one-sided jet is selected with [`Side`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Tolerance for matching path endpoints.
pub const POINT_TOL: f64 = 1e-8;

/// Parameters this close to a breakpoint count as sitting on it, so that
/// rounding in nested reparametrizations cannot pick the wrong side.
pub const BREAK_TOL: f64 = 1e-12;

/// Default membership floor for `|p(z)|`.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Interned form symbol.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormId(Arc<str>);

impl FormId {
    pub fn new(name: &str) -> Self {
        FormId(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for FormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FormId {
    fn from(s: &str) -> Self {
        FormId::new(s)
    }
}

pub(crate) fn pack(point: &[Complex64]) -> Vec<[f64; 2]> {
    point.iter().map(|z| [z.re, z.im]).collect()
}

/// `C^d` minus the zero set of an optional polynomial.
#[derive(Debug, Clone)]
pub struct Domain {
    coordinates: Vec<String>,
    excluded: Option<Expr>,
    gradient: Vec<Expr>,
    floor: f64,
    basepoint: Vec<Complex64>,
}

impl Domain {
    pub fn new(coordinates: &[&str], excluded: Option<Expr>, basepoint: Vec<Complex64>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::Scene("a domain needs at least one coordinate".into()));
        }
        if basepoint.len() != coordinates.len() {
            return Err(Error::Dimension {
                expected: coordinates.len(),
                got: basepoint.len(),
            });
        }
        if let Some(m) = excluded.as_ref().and_then(Expr::max_var) {
            if m >= coordinates.len() {
                return Err(Error::Dimension {
                    expected: coordinates.len(),
                    got: m + 1,
                });
            }
        }
        let gradient = match &excluded {
            Some(p) => (0..coordinates.len()).map(|j| p.diff(j)).collect(),
            None => Vec::new(),
        };
        let domain = Domain {
            coordinates: coordinates.iter().map(|s| s.to_string()).collect(),
            excluded,
            gradient,
            floor: DEFAULT_FLOOR,
            basepoint,
        };
        domain.check(&domain.basepoint)?;
        Ok(domain)
    }

    /// Parses the excluded polynomial from a string.
    pub fn with_excluded_str(coordinates: &[&str], excluded: &str, basepoint: Vec<Complex64>) -> Result<Self> {
        let p = Expr::parse(excluded, coordinates)?;
        Domain::new(coordinates, Some(p), basepoint)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> Vec<&str> {
        self.coordinates.iter().map(String::as_str).collect()
    }

    pub fn excluded(&self) -> Option<&Expr> {
        self.excluded.as_ref()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn basepoint(&self) -> &[Complex64] {
        &self.basepoint
    }

    /// Membership test; points within `floor` of the excluded locus are errors.
    pub fn check(&self, point: &[Complex64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: point.len(),
            });
        }
        if point.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Evaluation {
                what: "path point".into(),
            });
        }
        if let Some(p) = &self.excluded {
            let value = p.eval(point).norm();
            if !(value >= self.floor) {
                return Err(Error::DomainViolation {
                    point: pack(point),
                    value,
                    floor: self.floor,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[Complex64]) -> bool {
        self.check(point).is_ok()
    }

    /// First-order estimate `|p| / |grad p|` of the distance to the excluded
    /// locus; infinite when nothing is excluded.
    pub fn margin(&self, point: &[Complex64]) -> f64 {
        match &self.excluded {
            None => f64::INFINITY,
            Some(p) => {
                let value = p.eval(point).norm();
                let grad = self
                    .gradient
                    .iter()
                    .map(|g| g.eval(point).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if grad == 0.0 {
                    f64::INFINITY
                } else {
                    value / grad
                }
            }
        }
    }
}

/// A holomorphic 1-form `sum_j f_j dz_j`.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub id: FormId,
    pub coefficients: Vec<Expr>,
    pub closed: bool,
}

impl OneForm {
    pub fn new(id: &str, coefficients: Vec<Expr>, closed: bool) -> Self {
        OneForm {
            id: FormId::new(id),
            coefficients,
            closed,
        }
    }

    /// Builds a form from coefficient strings in the given coordinates.
    pub fn parse(id: &str, coefficients: &[&str], coordinates: &[&str], closed: bool) -> Result<Self> {
        let coefficients = coefficients
            .iter()
            .map(|c| Expr::parse(c, coordinates))
            .collect::<Result<Vec<_>>>()?;
        Ok(OneForm::new(id, coefficients, closed))
    }

    /// Pairing with a tangent vector at `point`.
    pub fn pair(&self, point: &[Complex64], velocity: &[Complex64]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, v) in self.coefficients.iter().zip(velocity) {
            if *v != Complex64::new(0.0, 0.0) {
                acc += c.eval_finite(point)? * v;
            }
        }
        Ok(acc)
    }

    /// Largest antisymmetric part `|d_j f_k - d_k f_j|`, relative to the
    /// Jacobian's size, of the finite-difference Jacobian at `samples` random points of `domain`
    /// drawn from a box of half-width `radius` around the basepoint.
    pub fn curl_probe<R: Rng>(&self, domain: &Domain, rng: &mut R, samples: usize, radius: f64) -> Result<f64> {
        let d = domain.dim();
        if d == 1 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        let mut taken = 0;
        let mut attempts = 0;
        while taken < samples {
            attempts += 1;
            if attempts > samples * 100 {
                return Err(Error::Scene("could not sample domain points for the curl probe".into()));
            }
            let point: Vec<Complex64> = domain
                .basepoint()
                .iter()
                .map(|b| b + Complex64::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)))
                .collect();
            let margin = domain.margin(&point);
            if margin < 1e-3 || !domain.contains(&point) {
                continue;
            }
            // Step relative to the distance to the excluded locus keeps the
            // truncation error of the central difference uniformly small.
            let h = 1e-4 * margin.min(1.0);
            let partial = |k: usize, j: usize| {
                let mut hi = point.clone();
                let mut lo = point.clone();
                hi[j] += h;
                lo[j] -= h;
                (self.coefficients[k].eval(&hi) - self.coefficients[k].eval(&lo)) / (2.0 * h)
            };
            let jacobian: Vec<Vec<Complex64>> = (0..d).map(|k| (0..d).map(|j| partial(k, j)).collect()).collect();
            if jacobian.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                continue;
            }
            let scale = 1.0 + jacobian.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
            for j in 0..d {
                for k in (j + 1)..d {
                    worst = worst.max((jacobian[k][j] - jacobian[j][k]).norm() / scale);
                }
            }
            taken += 1;
        }
        Ok(worst)
    }
}

/// Tolerance for the finite-difference closedness probe.
pub const CLOSEDNESS_TOL: f64 = 1e-6;

/// Named forms over one domain.
#[derive(Debug, Clone)]
pub struct FormTable {
    domain: Domain,
    forms: BTreeMap<FormId, OneForm>,
}

impl FormTable {
    pub fn new(domain: Domain) -> Self {
        FormTable {
            domain,
            forms: BTreeMap::new(),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn insert(&mut self, form: OneForm) -> Result<FormId> {
        if form.coefficients.len() != self.domain.dim() {
            return Err(Error::Dimension {
                expected: self.domain.dim(),
                got: form.coefficients.len(),
            });
        }
        if let Some(m) = form.coefficients.iter().filter_map(Expr::max_var).max() {
            if m >= self.domain.dim() {
                return Err(Error::Dimension {
                    expected: self.domain.dim(),
                    got: m + 1,
                });
            }
        }
        let id = form.id.clone();
        self.forms.insert(id.clone(), form);
        Ok(id)
    }

    /// Parses and inserts a form in this table's coordinates.
    pub fn define(&mut self, id: &str, coefficients: &[&str], closed: bool) -> Result<FormId> {
        let coords = self.domain.coordinates();
        let form = OneForm::parse(id, coefficients, &coords, closed)?;
        self.insert(form)
    }

    pub fn get(&self, id: &FormId) -> Result<&OneForm> {
        self.forms
            .get(id)
            .ok_or_else(|| Error::UnknownName(id.to_string()))
    }

    pub fn contains(&self, id: &FormId) -> bool {
        self.forms.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &FormId> {
        self.forms.keys()
    }

    /// Pullback coefficient of a form at a precomputed jet.
    pub fn pair(&self, id: &FormId, jet: &Jet) -> Result<Complex64> {
        self.get(id)?.pair(&jet.point, &jet.velocity)
    }
}

/// A Z-module of closed forms, given by generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormModule {
    pub name: String,
    pub generators: Vec<FormId>,
}

impl FormModule {
    pub fn new(name: &str, generators: Vec<FormId>, table: &FormTable) -> Result<Self> {
        for g in &generators {
            if !table.get(g)?.closed {
                return Err(Error::NotClosed(g.to_string()));
            }
        }
        Ok(FormModule {
            name: name.to_string(),
            generators,
        })
    }

    pub fn is_generator(&self, id: &FormId) -> bool {
        self.generators.contains(id)
    }
}

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Point and velocity of a path at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub point: Vec<Complex64>,
    pub velocity: Vec<Complex64>,
}

/// A parametrized curve `[0, 1] -> C^d`, C^1 between its breakpoints.
pub trait Curve: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn jet(&self, s: f64, side: Side) -> Jet;
    /// Interior breakpoints, sorted and strictly inside `(0, 1)`.
    fn breakpoints(&self) -> Vec<f64>;
}

/// A C^1 piece of a parametric path: coordinates as expressions in the
/// global parameter `s` on `[start, end]`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub coords: Vec<Expr>,
    velocity: Vec<Expr>,
}

impl Segment {
    pub fn new(start: f64, end: f64, coords: Vec<Expr>) -> Self {
        let velocity = coords.iter().map(|c| c.diff(0)).collect();
        Segment {
            start,
            end,
            coords,
            velocity,
        }
    }

    pub fn parse(start: f64, end: f64, coords: &[&str]) -> Result<Self> {
        let coords = coords
            .iter()
            .map(|c| Expr::parse(c, &["s"]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Segment::new(start, end, coords))
    }
}

#[derive(Debug)]
struct Parametric {
    segments: Vec<Segment>,
}

impl Parametric {
    fn locate(&self, s: f64, side: Side) -> &Segment {
        let n = self.segments.len();
        for (k, seg) in self.segments.iter().enumerate() {
            let last = k + 1 == n;
            let inside = match side {
                Side::Left => s <= seg.end + BREAK_TOL || last,
                Side::Right => s < seg.end - BREAK_TOL || last,
            };
            if inside {
                return seg;
            }
        }
        &self.segments[n - 1]
    }
}

impl Curve for Parametric {
    fn dim(&self) -> usize {
        self.segments[0].coords.len()
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let seg = self.locate(s, side);
        let arg = [Complex64::new(s, 0.0)];
        Jet {
            point: seg.coords.iter().map(|c| c.eval(&arg)).collect(),
            velocity: seg.velocity.iter().map(|c| c.eval(&arg)).collect(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|seg| seg.start).collect()
    }
}

#[derive(Debug)]
struct Concat(Path, Path);

impl Curve for Concat {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let first = s < 0.5 - BREAK_TOL || ((s - 0.5).abs() <= BREAK_TOL && side == Side::Left);
        let (path, u) = if first {
            (&self.0, 2.0 * s)
        } else {
            (&self.1, 2.0 * s - 1.0)
        };
        let mut jet = path.jet(u, side);
        jet.velocity.iter_mut().for_each(|v| *v *= 2.0);
        jet
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.0.breakpoints().iter().map(|b| b / 2.0).collect();
        out.push(0.5);
        out.extend(self.1.breakpoints().iter().map(|b| 0.5 + b / 2.0));
        out
    }
}

#[derive(Debug)]
struct Inverse(Path);

impl Curve for Inverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let mut jet = self.0.jet(1.0 - s, side.flip());
        jet.velocity.iter_mut().for_each(|v| *v = -*v);
        jet
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints().iter().rev().map(|b| 1.0 - b).collect()
    }
}

#[derive(Debug)]
struct Subpath {
    path: Path,
    from: f64,
    to: f64,
}

impl Curve for Subpath {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn jet(&self, u: f64, side: Side) -> Jet {
        let rate = self.to - self.from;
        let side = if rate < 0.0 { side.flip() } else { side };
        let mut jet = self.path.jet(self.from + rate * u, side);
        jet.velocity.iter_mut().for_each(|v| *v *= rate);
        jet
    }

    fn breakpoints(&self) -> Vec<f64> {
        let rate = self.to - self.from;
        if rate == 0.0 {
            return Vec::new();
        }
        let mut out: Vec<f64> = self
            .path
            .breakpoints()
            .into_iter()
            .map(|b| (b - self.from) / rate)
            .filter(|u| *u > 0.0 && *u < 1.0)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

#[derive(Debug)]
struct Reparametrized {
    path: Path,
    sigma: Expr,
    dsigma: Expr,
}

impl Reparametrized {
    fn sigma(&self, s: f64) -> f64 {
        self.sigma.eval(&[Complex64::new(s, 0.0)]).re
    }

    fn inverse(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sigma(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl Curve for Reparametrized {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let arg = [Complex64::new(s, 0.0)];
        let rate = self.dsigma.eval(&arg).re;
        let mut jet = self.path.jet(self.sigma(s).clamp(0.0, 1.0), side);
        jet.velocity.iter_mut().for_each(|v| *v *= rate);
        jet
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.path.breakpoints().into_iter().map(|b| self.inverse(b)).collect()
    }
}

/// A piecewise-C^1 path, shared and immutable.
#[derive(Debug, Clone)]
pub struct Path(Arc<dyn Curve>);

impl Path {
    pub fn from_curve(curve: impl Curve + 'static) -> Self {
        Path(Arc::new(curve))
    }

    /// Builds a path from segments covering `[0, 1]` in order; checks
    /// coverage and continuity at the breakpoints.
    pub fn parametric(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidPath("no segments".into()))?;
        let dim = first.coords.len();
        if dim == 0 {
            return Err(Error::InvalidPath("zero-dimensional segment".into()));
        }
        if first.start != 0.0 || segments.last().map(|s| s.end) != Some(1.0) {
            return Err(Error::InvalidPath("segments must cover [0, 1]".into()));
        }
        for seg in &segments {
            if seg.coords.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: seg.coords.len(),
                });
            }
            if !(seg.end > seg.start) {
                return Err(Error::InvalidPath(format!(
                    "empty segment [{}, {}]",
                    seg.start, seg.end
                )));
            }
            if seg.coords.iter().filter_map(Expr::max_var).any(|m| m > 0) {
                return Err(Error::InvalidPath(
                    "segment expressions may only use the parameter `s`".into(),
                ));
            }
        }
        for pair in segments.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(Error::InvalidPath("segments must be contiguous".into()));
            }
            let s = Complex64::new(pair[0].end, 0.0);
            let gap = pair[0]
                .coords
                .iter()
                .zip(&pair[1].coords)
                .map(|(a, b)| (a.eval(&[s]) - b.eval(&[s])).norm())
                .fold(0.0, f64::max);
            if gap > POINT_TOL {
                return Err(Error::InvalidPath(format!(
                    "discontinuity of size {gap:e} at s = {}",
                    pair[0].end
                )));
            }
        }
        Ok(Path::from_curve(Parametric { segments }))
    }

    /// Single smooth segment from coordinate expressions in `s`.
    pub fn from_exprs(coords: &[&str]) -> Result<Self> {
        Path::parametric(vec![Segment::parse(0.0, 1.0, coords)?])
    }

    pub fn constant(point: &[Complex64]) -> Self {
        let coords = point.iter().map(|z| Expr::Const(*z)).collect();
        Path::from_curve(Parametric {
            segments: vec![Segment::new(0.0, 1.0, coords)],
        })
    }

    /// Straight segment from `a` to `b`.
    pub fn line(a: &[Complex64], b: &[Complex64]) -> Self {
        let s = Expr::var(0);
        let coords = a
            .iter()
            .zip(b)
            .map(|(p, q)| Expr::Const(*p) + Expr::Const(q - p) * s.clone())
            .collect();
        Path::from_curve(Parametric {
            segments: vec![Segment::new(0.0, 1.0, coords)],
        })
    }

    /// Circle in coordinate `coord`, all other coordinates frozen at `point`:
    /// `z_coord(s) = center + (point[coord] - center) * exp(2 pi i turns s)`.
    pub fn circle(point: &[Complex64], coord: usize, center: Complex64, turns: f64) -> Self {
        let s = Expr::var(0);
        let phase = (Expr::Const(Complex64::new(0.0, 2.0 * std::f64::consts::PI * turns)) * s).exp();
        let coords = point
            .iter()
            .enumerate()
            .map(|(j, z)| {
                if j == coord {
                    Expr::Const(center) + Expr::Const(z - center) * phase.clone()
                } else {
                    Expr::Const(*z)
                }
            })
            .collect();
        Path::from_curve(Parametric {
            segments: vec![Segment::new(0.0, 1.0, coords)],
        })
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn jet(&self, s: f64, side: Side) -> Jet {
        self.0.jet(s, side)
    }

    pub fn point(&self, s: f64) -> Vec<Complex64> {
        self.0.jet(s, Side::Right).point
    }

    pub fn start(&self) -> Vec<Complex64> {
        self.0.jet(0.0, Side::Right).point
    }

    pub fn end(&self) -> Vec<Complex64> {
        self.0.jet(1.0, Side::Left).point
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }

    /// The smooth pieces `[a, b]` partitioning `[0, 1]`.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0];
        for b in self.breakpoints() {
            if b > *cuts.last().unwrap() && b < 1.0 {
                cuts.push(b);
            }
        }
        cuts.push(1.0);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn is_loop(&self) -> bool {
        dist(&self.start(), &self.end()) <= POINT_TOL
    }

    /// Traverses `self` then `other`, each at double speed.
    pub fn concat(&self, other: &Path) -> Result<Path> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let gap = dist(&self.end(), &other.start());
        if gap > POINT_TOL {
            return Err(Error::Composition(format!(
                "end point and start point differ by {gap:e}"
            )));
        }
        Ok(Path::from_curve(Concat(self.clone(), other.clone())))
    }

    pub fn inverse(&self) -> Path {
        Path::from_curve(Inverse(self.clone()))
    }

    /// `u -> self(from + (to - from) u)`.
    pub fn subpath(&self, from: f64, to: f64) -> Path {
        Path::from_curve(Subpath {
            path: self.clone(),
            from,
            to,
        })
    }

    /// `s -> self(sigma(s))` for an increasing C^1 bijection `sigma` of
    /// `[0, 1]` given as an expression in `s`.
    pub fn reparametrize(&self, sigma: &str) -> Result<Path> {
        let sigma = Expr::parse(sigma, &["s"])?;
        let at = |s: f64| sigma.eval(&[Complex64::new(s, 0.0)]);
        if (at(0.0) - 0.0).norm() > 1e-12 || (at(1.0) - 1.0).norm() > 1e-12 {
            return Err(Error::InvalidPath("reparametrization must fix 0 and 1".into()));
        }
        let dsigma = sigma.diff(0);
        for k in 0..=256 {
            let s = k as f64 / 256.0;
            let v = at(s);
            let d = dsigma.eval(&[Complex64::new(s, 0.0)]);
            if v.im.abs() > 1e-12 || d.re < 0.0 {
                return Err(Error::InvalidPath(
                    "reparametrization must be real and nondecreasing".into(),
                ));
            }
        }
        Ok(Path::from_curve(Reparametrized {
            path: self.clone(),
            sigma,
            dsigma,
        }))
    }

    /// Sample parameters: every breakpoint plus `per_piece` uniform points
    /// in each smooth piece (endpoints included).
    pub fn sample_params(&self, per_piece: usize) -> Vec<(f64, Side)> {
        let mut out = Vec::new();
        for (a, b) in self.pieces() {
            for k in 0..=per_piece {
                let s = a + (b - a) * k as f64 / per_piece as f64;
                let side = if k == per_piece { Side::Left } else { Side::Right };
                out.push((s, side));
            }
        }
        out
    }

    /// Checks that sampled points lie in `domain` and that the path is
    /// continuous at its breakpoints.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.dim() != domain.dim() {
            return Err(Error::Dimension {
                expected: domain.dim(),
                got: self.dim(),
            });
        }
        for (s, side) in self.sample_params(128) {
            domain.check(&self.jet(s, side).point)?;
        }
        for b in self.breakpoints() {
            let gap = dist(&self.jet(b, Side::Left).point, &self.jet(b, Side::Right).point);
            if gap > POINT_TOL {
                return Err(Error::InvalidPath(format!(
                    "discontinuity of size {gap:e} at s = {b}"
                )));
            }
        }
        Ok(())
    }

    /// Largest distance between sampled points.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<_> = self
            .sample_params(64)
            .into_iter()
            .map(|(s, side)| self.jet(s, side).point)
            .collect();
        let mut best: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max(dist(a, b));
            }
        }
        best
    }
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `f(t)` with `lambda^* omega = f(t) dt`, checking domain membership.
pub fn pullback(table: &FormTable, form: &FormId, path: &Path, t: f64, side: Side) -> Result<Complex64> {
    let jet = path.jet(t, side);
    table.domain().check(&jet.point)?;
    table.pair(form, &jet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn punctured_plane() -> FormTable {
        let domain = Domain::with_excluded_str(&["z"], "z", vec![c(1.0, 0.0)]).unwrap();
        let mut table = FormTable::new(domain);
        table.define("dz_z", &["1/z"], true).unwrap();
        table
    }

    #[test]
    fn circle_pullback_of_dlog_is_two_pi_i() {
        let table = punctured_plane();
        let circle = Path::from_exprs(&["exp(2*pi*i*s)"]).unwrap();
        for k in 0..10 {
            let f = pullback(&table, &"dz_z".into(), &circle, k as f64 / 9.0, Side::Right).unwrap();
            assert!((f - c(0.0, 2.0 * PI)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_path_has_zero_pullback() {
        let table = punctured_plane();
        let p = Path::constant(&[c(0.3, 0.4)]);
        let f = pullback(&table, &"dz_z".into(), &p, 0.5, Side::Right).unwrap();
        assert_eq!(f, c(0.0, 0.0));
    }

    #[test]
    fn unit_speed_coordinate_in_c2() {
        let domain = Domain::new(&["x", "y"], None, vec![c(0.0, 0.0); 2]).unwrap();
        let mut table = FormTable::new(domain);
        table.define("dx", &["1", "0"], true).unwrap();
        let p = Path::from_exprs(&["s", "1"]).unwrap();
        let f = pullback(&table, &"dx".into(), &p, 0.3, Side::Right).unwrap();
        assert_eq!(f, c(1.0, 0.0));
    }

    #[test]
    fn points_on_the_excluded_locus_are_rejected() {
        let table = punctured_plane();
        let through_zero = Path::from_exprs(&["s - 0.5"]).unwrap();
        let err = pullback(&table, &"dz_z".into(), &through_zero, 0.5, Side::Right).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { .. }));
        assert!(through_zero.validate(table.domain()).is_err());
        let near = [c(1e-9, 0.0)];
        assert!(table.domain().check(&near).is_err());
        let relaxed = table.domain().clone().with_floor(1e-12);
        assert!(relaxed.check(&near).is_ok());
    }

    #[test]
    fn subpath_inverse_and_concat() {
        let p = Path::from_exprs(&["s^2 + i*s"]).unwrap();
        let whole = p.subpath(0.0, 1.0);
        let inv2 = p.inverse().inverse();
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            assert!(dist(&whole.point(s), &p.point(s)) < 1e-15);
            assert!(dist(&inv2.point(s), &p.point(s)) < 1e-15);
        }
        let joined = p.subpath(0.0, 0.5).concat(&p.subpath(0.5, 1.0)).unwrap();
        assert_eq!(joined.breakpoints(), vec![0.5]);
        assert!(dist(&joined.point(0.5), &p.point(0.5)) < 1e-15);
        assert!(dist(&joined.point(0.75), &p.point(0.75)) < 1e-15);
        let err = p.concat(&p).unwrap_err();
        assert!(matches!(err, Error::Composition(_)));
    }

    #[test]
    fn breakpoints_use_one_sided_velocities() {
        let a = Path::from_exprs(&["s"]).unwrap();
        let b = Path::from_exprs(&["1 + i*s"]).unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.jet(0.5, Side::Left).velocity, vec![c(2.0, 0.0)]);
        assert_eq!(ab.jet(0.5, Side::Right).velocity, vec![c(0.0, 2.0)]);
        let ba = ab.inverse();
        assert_eq!(ba.jet(0.5, Side::Left).velocity, vec![c(0.0, -2.0)]);
        assert_eq!(ba.jet(0.5, Side::Right).velocity, vec![c(-2.0, 0.0)]);
    }

    #[test]
    fn parametric_rejects_discontinuities() {
        let segs = vec![
            Segment::parse(0.0, 0.5, &["s"]).unwrap(),
            Segment::parse(0.5, 1.0, &["s + 1"]).unwrap(),
        ];
        assert!(matches!(Path::parametric(segs), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn reparametrization_moves_breakpoints() {
        let a = Path::from_exprs(&["s"]).unwrap();
        let b = Path::from_exprs(&["1 + s"]).unwrap();
        let ab = a.concat(&b).unwrap().reparametrize("s^2").unwrap();
        let bp = ab.breakpoints();
        assert!((bp[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(a.reparametrize("1 - s").is_err());
    }

    #[test]
    fn curl_probe_separates_closed_and_non_closed() {
        let domain = Domain::with_excluded_str(&["x", "y"], "x^3 + y^2", vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let delta = OneForm::parse(
            "delta",
            &["x^2/(2*(x^3 + y^2))", "y/(3*(x^3 + y^2))"],
            &["x", "y"],
            true,
        )
        .unwrap();
        assert!(delta.curl_probe(&domain, &mut rng, 100, 1.0).unwrap() < CLOSEDNESS_TOL);
        let area = OneForm::parse("xdy", &["0", "x"], &["x", "y"], false).unwrap();
        assert!(area.curl_probe(&domain, &mut rng, 100, 1.0).unwrap() > 1e-3);
    }
}

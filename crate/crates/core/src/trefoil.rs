//! The trefoil complement `C^2 \ {x^3 + y^2 = 0}` and its infinite cyclic
//! cover `C x F -> C^2 \ C`, `(t, X, Y) -> (e^{2 pi i t / 3} X, e^{pi i t} Y)`,
//! with `F = {X^3 + Y^2 = 1}`.
//!
//! Base forms are the single-valued forms induced by the deck-invariant
//! forms upstairs, written in base coordinates with `P = x^3 + y^2`:
//!
//! ```text
//! om_m  = (y dx - 2/3 x dy) / P          <- e^{-pi i t/3} dX/Y
//! om_p  = (x y dx - 2/3 x^2 dy) / P      <- e^{ pi i t/3} X dX/Y
//! delta = (x^2/2 dx + y/3 dy) / P        <- (pi i / 3) dt = dP / (6P)
//! ```
//!
//! Only `delta` is closed downstairs.

use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Curve, Domain, FormId, FormModule, FormTable, Jet, OneForm, Path, Segment, Side};
use crate::homotopy::{LoopFamily, LoopWord};
use crate::hopf::{Algebra, ExpSum, ReducedWord};
use crate::transport::{Connection, Evaluator, Settings};
use crate::word::{ExpWord, Exponent};

pub const DELTA: &str = "delta";
pub const OMEGA_MINUS: &str = "om_m";
pub const OMEGA_PLUS: &str = "om_p";
/// Upstairs `dX/Y` and `X dX/Y`.
pub const UP_MINUS: &str = "w_m";
pub const UP_PLUS: &str = "w_p";
/// Upstairs `(pi i / 3) dt`, `e^{-pi i t/3} dX/Y`, `e^{pi i t/3} X dX/Y`.
pub const UP_DELTA: &str = "g_dt";
pub const UP_TWISTED_MINUS: &str = "w_m_tw";
pub const UP_TWISTED_PLUS: &str = "w_p_tw";

/// Radius of the meridian circles.
pub const MERIDIAN_RADIUS: f64 = 0.2;
/// Lift continuation keeps consecutive `arg P` increments below this.
pub const MAX_ARG_STEP: f64 = PI / 4.0;
/// Demo threshold for separating `[a, b]` from the trivial loop.
pub const DEMO_THRESHOLD: f64 = 1e-3;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `zeta_6 = e^{pi i / 3}`.
pub fn zeta6() -> Complex64 {
    Complex64::from_polar(1.0, PI / 3.0)
}

fn excluded(x: Complex64, y: Complex64) -> Complex64 {
    x * x * x + y * y
}

/// Roots of `x^3 + 1`, the punctures of the line `{y = 1}`, in meridian
/// order `a, b, c`.
pub fn punctures() -> [Complex64; 3] {
    [
        Complex64::from_polar(1.0, PI / 3.0),
        c(-1.0, 0.0),
        Complex64::from_polar(1.0, -PI / 3.0),
    ]
}

/// Base and upstairs geometry of the trefoil example.
#[derive(Debug, Clone)]
pub struct TrefoilScene {
    base: Evaluator,
    upstairs: Evaluator,
    module: FormModule,
    algebra: Arc<Algebra>,
    family: LoopFamily,
}

impl TrefoilScene {
    pub fn new(settings: Settings) -> Result<Self> {
        let base_domain = Domain::with_excluded_str(&["x", "y"], "x^3 + y^2", vec![c(0.0, 0.0), c(1.0, 0.0)])?;
        let mut base = FormTable::new(base_domain);
        base.define(DELTA, &["x^2/(2*(x^3 + y^2))", "y/(3*(x^3 + y^2))"], true)?;
        base.define(OMEGA_MINUS, &["y/(x^3 + y^2)", "-2*x/(3*(x^3 + y^2))"], false)?;
        base.define(OMEGA_PLUS, &["x*y/(x^3 + y^2)", "-2*x^2/(3*(x^3 + y^2))"], false)?;
        let module = FormModule::new("L", vec![FormId::new(DELTA)], &base)?;

        let up_domain = Domain::with_excluded_str(&["t", "X", "Y"], "Y", vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])?;
        let mut up = FormTable::new(up_domain);
        up.define(UP_MINUS, &["0", "1/Y", "0"], false)?;
        up.define(UP_PLUS, &["0", "X/Y", "0"], false)?;
        up.define(UP_DELTA, &["pi*i/3", "0", "0"], true)?;
        up.define(UP_TWISTED_MINUS, &["0", "exp(-pi*i*t/3)/Y", "0"], false)?;
        up.define(UP_TWISTED_PLUS, &["0", "exp(pi*i*t/3)*X/Y", "0"], false)?;

        let mut family = LoopFamily::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        for (name, root) in ["a", "b", "c"].iter().zip(punctures()) {
            family.add(name, meridian(root))?;
        }
        Ok(TrefoilScene {
            base: Evaluator::new(base, settings),
            upstairs: Evaluator::new(up, settings),
            algebra: Arc::new(Algebra::new(module.clone())),
            module,
            family,
        })
    }

    pub fn base(&self) -> &Evaluator {
        &self.base
    }

    pub fn upstairs(&self) -> &Evaluator {
        &self.upstairs
    }

    pub fn module(&self) -> &FormModule {
        &self.module
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn meridians(&self) -> &LoopFamily {
        &self.family
    }

    pub fn loop_path(&self, word: &str) -> Result<Path> {
        self.family.compile_str(word)
    }

    /// `int delta = (1/6) Delta log P`, read off the branch continuation.
    pub fn delta_by_winding(&self, path: &Path) -> Result<Complex64> {
        let lift = CoverLift::new(path, 0)?;
        Ok(c(0.0, PI / 3.0) * (lift.t_end - lift.t_start))
    }

    /// Maximum over `samples` random points of `F` of
    /// `|psi^* w_-1 - zeta6 w_-1|` and `|psi^* w_1 - zeta6^-1 w_1|`.
    pub fn psi_eigen_check(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = zeta6();
        let (sx, sy) = (z.powi(-2), z.powi(-3));
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let p = random_fiber_point(&mut rng);
            let image = [p[0] * sx, p[1] * sy];
            // coefficient of dX; psi^*(f dX) = f(psi p) * sx dX
            for (form, eigen) in [(fiber_minus as fn(&[Complex64; 2]) -> Complex64, z), (fiber_plus, z.inv())] {
                let pulled = form(&image) * sx;
                worst = worst.max((pulled - eigen * form(&p)).norm());
            }
        }
        Ok(worst)
    }

    /// Deck invariance of the twisted forms and `(pi i/3) dt` under
    /// `(t, X, Y) -> (t + 1, zeta6^-2 X, zeta6^-3 Y)`.
    pub fn deck_invariance_check(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = zeta6();
        let scales = [c(1.0, 0.0), z.powi(-2), z.powi(-3)];
        let table = self.upstairs.table();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let f = random_fiber_point(&mut rng);
            let t = c(rng.gen_range(-2.0..2.0), rng.gen_range(-0.5..0.5));
            let p = [t, f[0], f[1]];
            let q = [t + 1.0, f[0] * scales[1], f[1] * scales[2]];
            for id in [UP_TWISTED_MINUS, UP_TWISTED_PLUS, UP_DELTA] {
                let form = table.get(&FormId::new(id))?;
                for j in 0..3 {
                    let at_p = form.coefficients[j].eval_finite(&p)?;
                    let at_q = form.coefficients[j].eval_finite(&q)? * scales[j];
                    worst = worst.max((at_q - at_p).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Lifts a base path through the cover starting on sheet `t(0) = log P / 2 pi i + sheet`.
    pub fn lift(&self, path: &Path) -> Result<CoverLift> {
        path.validate(self.base.table().domain())?;
        CoverLift::new(path, 0)
    }

    /// `<I, path>` on the base against the reduced ordinary integral on the lift.
    pub fn reduction_check(&self, word: &ExpWord, path: &Path) -> Result<ReductionCheck> {
        let reduced = pullback_reduce(word)?;
        let lift = self.lift(path)?;
        let downstairs = self.base.evaluate_word(word, path)?;
        let upstairs = reduced.evaluate(&self.upstairs, &lift)?;
        let generic = self.generic_reduction(word)?;
        let generic_value = generic.1.evaluate(&generic.0, &lift.lifted)?;
        Ok(ReductionCheck {
            word: word.to_string(),
            reduced: reduced.word.to_string(),
            downstairs,
            upstairs,
            generic: generic_value,
            deviation: (downstairs - upstairs).norm().max((downstairs - generic_value).norm()),
        })
    }

    /// `phi^* I` reduced with the generic exact-exponent rule; returns the
    /// evaluator on the enlarged upstairs table and the reduced word.
    pub fn generic_reduction(&self, word: &ExpWord) -> Result<(Evaluator, ReducedWord)> {
        let lifted = pullback_word(word)?;
        let mut table = self.upstairs.table().clone();
        let g = Expr::parse("pi*i*t/3", &["t", "X", "Y"])?;
        let mut current = ReducedWord::plain(lifted);
        for k in 0..current.word.exponents().len() {
            let e = &current.word.exponents()[k];
            let mult = e.coefficient(&FormId::new(UP_DELTA));
            if mult != 0 {
                current = current.reduce(&mut table, k, &(g.clone() * Expr::real(mult as f64)))?;
            }
        }
        Ok((self.upstairs.with_table(table), current))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionCheck {
    pub word: String,
    pub reduced: String,
    pub downstairs: Complex64,
    pub upstairs: Complex64,
    pub generic: Complex64,
    pub deviation: f64,
}

fn fiber_minus(p: &[Complex64; 2]) -> Complex64 {
    p[1].inv()
}

fn fiber_plus(p: &[Complex64; 2]) -> Complex64 {
    p[0] / p[1]
}

fn random_fiber_point<R: Rng>(rng: &mut R) -> [Complex64; 2] {
    loop {
        let x = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let y = (Complex64::new(1.0, 0.0) - x * x * x).sqrt();
        if y.norm() > 1e-2 {
            let y = if rng.gen_bool(0.5) { y } else { -y };
            return [x, y];
        }
    }
}

/// Meridian around `root` in the line `{y = 1}`: straight tail from `x = 0`
/// to `(1 - r) root`, one counterclockwise circle of radius `r`, and back.
pub fn meridian(root: Complex64) -> Path {
    let s = Expr::var(0);
    let r = MERIDIAN_RADIUS;
    let y = Expr::real(1.0);
    let near = root * (1.0 - r / root.norm());
    let third = 1.0 / 3.0;
    let out = Expr::Const(near * 3.0) * s.clone();
    let phase = (Expr::Const(c(0.0, 2.0 * PI)) * (Expr::real(3.0) * s.clone() - Expr::real(1.0))).exp();
    let around = Expr::Const(root) + Expr::Const(near - root) * phase;
    let back = Expr::Const(near) * (Expr::real(3.0) - Expr::real(3.0) * s);
    Path::parametric(vec![
        Segment::new(0.0, third, vec![out, y.clone()]),
        Segment::new(third, 2.0 * third, vec![around, y.clone()]),
        Segment::new(2.0 * third, 1.0, vec![back, y]),
    ])
    .expect("meridian segments are continuous")
}

/// A base path together with its lift `(t, X, Y)` to `C x F`.
#[derive(Debug, Clone)]
pub struct CoverLift {
    pub base: Path,
    pub lifted: Path,
    pub t_start: Complex64,
    pub t_end: Complex64,
}

impl CoverLift {
    /// Lift starting at `t(0) = Log P(base(0)) / 2 pi i + sheet`.
    pub fn new(base: &Path, sheet: i64) -> Result<CoverLift> {
        let curve = LiftCurve::new(base.clone(), sheet)?;
        let t_start = curve.logs[0] / c(0.0, 2.0 * PI);
        let t_end = *curve.logs.last().unwrap() / c(0.0, 2.0 * PI);
        Ok(CoverLift {
            base: base.clone(),
            lifted: Path::from_curve(curve),
            t_start,
            t_end,
        })
    }

    /// `t(1) - t(0)`, the winding number of `P` along the base path.
    pub fn winding(&self) -> Complex64 {
        self.t_end - self.t_start
    }
}

impl std::ops::Deref for CoverLift {
    type Target = Path;

    fn deref(&self) -> &Path {
        &self.lifted
    }
}

#[derive(Debug)]
struct LiftCurve {
    base: Path,
    knots: Vec<f64>,
    /// Continuous `log P` at the knots.
    logs: Vec<Complex64>,
}

fn p_at(base: &Path, s: f64, side: Side) -> Complex64 {
    let pt = base.jet(s, side).point;
    excluded(pt[0], pt[1])
}

impl LiftCurve {
    fn new(base: Path, sheet: i64) -> Result<Self> {
        if base.dim() != 2 {
            return Err(Error::Dimension { expected: 2, got: base.dim() });
        }
        let mut knots: Vec<f64> = base.sample_params(64).into_iter().map(|(s, _)| s).collect();
        knots.dedup();
        let p0 = p_at(&base, 0.0, Side::Right);
        if p0 == c(0.0, 0.0) {
            return Err(Error::Branch { s: 0.0 });
        }
        let mut out_knots = vec![0.0];
        let mut logs = vec![p0.ln() + c(0.0, 2.0 * PI * sheet as f64)];
        let mut prev = p0;
        for pair in knots.windows(2) {
            let mut stack = vec![(pair[0], pair[1], 0)];
            // depth-first refinement keeps the knots ordered
            while let Some((a, b, depth)) = stack.pop() {
                let pb = p_at(&base, b, Side::Left);
                let step = (pb / prev).arg();
                if pb == c(0.0, 0.0) || !step.is_finite() {
                    return Err(Error::Branch { s: b });
                }
                if step.abs() >= MAX_ARG_STEP {
                    if depth > 40 {
                        return Err(Error::Branch { s: a });
                    }
                    let mid = 0.5 * (a + b);
                    stack.push((mid, b, depth + 1));
                    stack.push((a, mid, depth + 1));
                    continue;
                }
                let last = *logs.last().unwrap();
                logs.push(c(pb.norm().ln(), last.im + step));
                out_knots.push(b);
                prev = pb;
            }
        }
        Ok(LiftCurve {
            base,
            knots: out_knots,
            logs,
        })
    }

    fn log_at(&self, s: f64, p: Complex64) -> Complex64 {
        let j = self.knots.partition_point(|k| *k <= s).clamp(1, self.knots.len() - 1);
        let (a, b) = (self.knots[j - 1], self.knots[j]);
        let w = if b > a { ((s - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        let guess = self.logs[j - 1].im * (1.0 - w) + self.logs[j].im * w;
        let principal = p.ln();
        let turns = ((guess - principal.im) / (2.0 * PI)).round();
        principal + c(0.0, 2.0 * PI * turns)
    }
}

impl Curve for LiftCurve {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, s: f64, side: Side) -> Jet {
        let base = self.base.jet(s, side);
        let (x, y) = (base.point[0], base.point[1]);
        let (dx, dy) = (base.velocity[0], base.velocity[1]);
        let p = excluded(x, y);
        let dp = x * x * dx * 3.0 + y * dy * 2.0;
        let two_pi_i = c(0.0, 2.0 * PI);
        let t = self.log_at(s, p) / two_pi_i;
        let dt = dp / (p * two_pi_i);
        let ex = (-two_pi_i * t / 3.0).exp();
        let ey = (-two_pi_i * t / 2.0).exp();
        Jet {
            point: vec![t, ex * x, ey * y],
            velocity: vec![
                dt,
                ex * (dx - two_pi_i / 3.0 * dt * x),
                ey * (dy - two_pi_i / 2.0 * dt * y),
            ],
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// `int om_e1 e^{e1 delta} om_e2 e^{(e1+e2) delta} ... om_en e^{(e1+...+en) delta}`.
pub fn signed_word(signs: &[i8]) -> ExpWord {
    let mut exponents = vec![Exponent::zero()];
    let mut linears = Vec::new();
    let mut total = 0i64;
    for &e in signs {
        total += e as i64;
        linears.push(FormId::new(if e > 0 { OMEGA_PLUS } else { OMEGA_MINUS }));
        exponents.push(Exponent::scaled(DELTA, total));
    }
    ExpWord::new(exponents, linears).expect("alternating by construction")
}

/// Reads the sign vector back from a word of the above shape.
pub fn word_signs(word: &ExpWord) -> Result<Vec<i8>> {
    if !word.exponents()[0].is_zero() {
        return Err(Error::Shape("the first exponent must vanish".into()));
    }
    let mut signs = Vec::new();
    let mut total = 0i64;
    for (k, w) in word.linears().iter().enumerate() {
        let e: i8 = match w.as_str() {
            OMEGA_PLUS => 1,
            OMEGA_MINUS => -1,
            other => return Err(Error::Shape(format!("unexpected linear form `{other}`"))),
        };
        total += e as i64;
        if word.exponents()[k + 1] != Exponent::scaled(DELTA, total) {
            return Err(Error::Shape(format!(
                "exponent {} should be {total}*{DELTA}",
                k + 1
            )));
        }
        signs.push(e);
    }
    Ok(signs)
}

/// The reduced form of `phi^* I`: `exp(end_twist * pi i t(1) / 3)` times the
/// ordinary integral of `w_e1 ... w_en` on the lift.
#[derive(Debug, Clone, PartialEq)]
pub struct PulledBack {
    pub signs: Vec<i8>,
    pub word: ExpWord,
    pub end_twist: i64,
}

impl PulledBack {
    pub fn evaluate(&self, upstairs: &Evaluator, lift: &CoverLift) -> Result<Complex64> {
        let factor = (c(0.0, PI / 3.0) * lift.t_end * self.end_twist as f64).exp();
        Ok(factor * upstairs.evaluate_word(&self.word, &lift.lifted)?)
    }
}

/// `phi^* I = int w_e1 ... w_en` (up to the endpoint factor), by tracking
/// the twist `e^{c g}` carried by each linear form while the exact
/// exponents `k dg`, `g = pi i t / 3`, are removed one at a time.
pub fn pullback_reduce(word: &ExpWord) -> Result<PulledBack> {
    let signs = word_signs(word)?;
    let n = signs.len();
    // phi^* om_e = e^{e g} w_e
    let mut twists: Vec<i64> = signs.iter().map(|e| *e as i64).collect();
    let mut end_twist = 0;
    for k in 1..=n {
        let s = word.exponents()[k].coefficient(&FormId::new(DELTA));
        twists[k - 1] -= s;
        if k < n {
            twists[k] += s;
        } else {
            end_twist += s;
        }
    }
    debug_assert!(twists.iter().all(|t| *t == 0));
    let forms: Vec<FormId> = signs
        .iter()
        .map(|e| FormId::new(if *e > 0 { UP_PLUS } else { UP_MINUS }))
        .collect();
    Ok(PulledBack {
        signs,
        word: ExpWord::ordinary(&forms),
        end_twist,
    })
}

/// `phi^*` applied symbol by symbol.
pub fn pullback_word(word: &ExpWord) -> Result<ExpWord> {
    let map = |id: &FormId| -> Result<FormId> {
        Ok(FormId::new(match id.as_str() {
            DELTA => UP_DELTA,
            OMEGA_MINUS => UP_TWISTED_MINUS,
            OMEGA_PLUS => UP_TWISTED_PLUS,
            other => return Err(Error::UnknownName(other.to_string())),
        }))
    };
    let exponents = word
        .exponents()
        .iter()
        .map(|e| {
            e.terms()
                .map(|(id, k)| Ok(Exponent::scaled(map(id)?, k)))
                .try_fold(Exponent::zero(), |acc, x: Result<Exponent>| Ok::<_, Error>(acc.add(&x?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let linears = word.linears().iter().map(map).collect::<Result<Vec<_>>>()?;
    ExpWord::new(exponents, linears)
}

/// One element `(int delta)^m int e^{k delta} I_eps` of the basis.
#[derive(Debug, Clone, Serialize)]
pub struct BasisWord {
    pub m: usize,
    pub k: i64,
    pub signs: Vec<i8>,
    pub sum: ExpSum,
}

impl BasisWord {
    pub fn label(&self) -> String {
        let eps: String = self.signs.iter().map(|e| if *e > 0 { '+' } else { '-' }).collect();
        format!("m={} k={} eps=({})", self.m, self.k, eps)
    }

    /// Length of the expanded sum: `m + n`.
    pub fn length(&self) -> usize {
        self.m + self.signs.len()
    }
}

/// All sign vectors of length `n`, in lexicographic order with `-` first.
pub fn sign_vectors(n: usize) -> Vec<Vec<i8>> {
    (0..1usize << n)
        .map(|bits| {
            (0..n)
                .map(|j| if bits >> (n - 1 - j) & 1 == 1 { 1 } else { -1 })
                .collect()
        })
        .collect()
}

/// Enumerates `(int delta)^m int e^{k delta} I_eps` for `m <= max_m`,
/// `k` in `k_range`, `|eps| <= max_n`, expanded with the algebra product.
pub fn basis_words(alg: &Algebra, max_n: usize, max_m: usize, k_range: RangeInclusive<i64>) -> Result<Vec<BasisWord>> {
    let delta = ExpSum::word(ExpWord::ordinary(&[FormId::new(DELTA)]));
    let mut powers = vec![ExpSum::one()];
    for _ in 0..max_m {
        let next = alg.product(powers.last().unwrap(), &delta)?;
        powers.push(next);
    }
    let mut jobs = Vec::new();
    for m in 0..=max_m {
        for k in k_range.clone() {
            for n in 0..=max_n {
                for signs in sign_vectors(n) {
                    jobs.push((m, k, signs));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(m, k, signs)| {
            let character = ExpSum::word(ExpWord::exponential(Exponent::scaled(DELTA, k)));
            let head = alg.product(&powers[m], &character)?;
            let sum = alg.product(&head, &ExpSum::word(signed_word(&signs)))?;
            Ok(BasisWord { m, k, signs, sum })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub label: String,
    pub value_commutator: Complex64,
    pub value_trivial: Complex64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Winner {
    pub label: String,
    pub integral: String,
    pub value_ode: Complex64,
    pub value_series: Complex64,
    pub series_degree: usize,
    pub cross_check: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub commutator: String,
    pub delta_value: Complex64,
    pub delta_by_winding: Complex64,
    /// `(k, <int e^{k delta}, [a, b]>)`.
    pub characters: Vec<(i64, Complex64)>,
    pub max_character_error: f64,
    pub candidates: Vec<Candidate>,
    pub winner: Option<Winner>,
    pub threshold: f64,
    pub separated: bool,
}

/// Shows that `[a, b]` is invisible to `int delta` and every character
/// `int e^{k delta}`, but not to some length-1 basis integral.
pub fn commutator_demo(scene: &TrefoilScene, max_n: usize, max_m: usize, k_max: i64, series_degree: usize) -> Result<CommutatorReport> {
    let word = LoopWord::commutator(&LoopWord::parse("a")?, &LoopWord::parse("b")?);
    let gamma = scene.meridians().compile(&word)?;
    let trivial = scene.meridians().compile(&LoopWord::parse("1")?)?;
    let ev = scene.base();
    let delta_value = ev.iterated_integral(&[FormId::new(DELTA)], &gamma)?;
    let delta_by_winding = scene.delta_by_winding(&gamma)?;
    let characters: Vec<(i64, Complex64)> = (-k_max..=k_max)
        .map(|k| Ok((k, ev.exp_integral(&ExpWord::exponential(Exponent::scaled(DELTA, k)), &gamma)?)))
        .collect::<Result<_>>()?;
    let max_character_error = characters.iter().map(|(_, v)| (v - 1.0).norm()).fold(0.0, f64::max);

    let basis = basis_words(scene.algebra(), max_n, max_m, -k_max..=k_max)?;
    let short: Vec<&BasisWord> = basis.iter().filter(|b| b.length() == 1).collect();
    let sums: Vec<ExpSum> = short.iter().map(|b| b.sum.clone()).collect();
    let values = ev.evaluate_many(&sums, &[gamma.clone(), trivial])?;
    let candidates: Vec<Candidate> = short
        .iter()
        .zip(&values)
        .map(|(b, v)| Candidate {
            label: b.label(),
            value_commutator: v[0],
            value_trivial: v[1],
            difference: (v[0] - v[1]).norm(),
        })
        .collect();
    let best = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.difference > DEMO_THRESHOLD)
        .max_by(|a, b| a.1.difference.partial_cmp(&b.1.difference).unwrap());
    let winner = match best {
        None => None,
        Some((i, cand)) => {
            let sum = &short[i].sum;
            let mut series = sum.constant();
            for (w, coef) in sum.terms() {
                series += ev.exp_series_truncated(w, &gamma, series_degree)?.0 * coef;
            }
            Some(Winner {
                label: cand.label.clone(),
                integral: sum.to_string(),
                value_ode: cand.value_commutator,
                value_series: series,
                series_degree,
                cross_check: (series - cand.value_commutator).norm(),
            })
        }
    };
    Ok(CommutatorReport {
        commutator: word.to_string(),
        delta_value,
        delta_by_winding,
        characters,
        max_character_error,
        separated: winner.is_some(),
        candidates,
        winner,
        threshold: DEMO_THRESHOLD,
    })
}

/// Upper-triangular connection realizing a basis-shaped word, for braid checks.
pub fn signed_connection(signs: &[i8]) -> Connection {
    Connection::superdiagonal(&signed_word(signs))
}

/// Base-point form used for the non-closed control in closedness probes.
pub fn control_form() -> OneForm {
    OneForm::parse("x_dy", &["0", "x"], &["x", "y"], false).expect("valid control form")
}

//! Property suites behind `expint verify <suite>`.

use expint::homotopy::{character_check, closedness_probe, monodromy, LoopWord, PerturbationSpec};
use expint::hopf::{antipode, antipode_sum, coproduct, counit_word, left_times_antipode_right};
use expint::scene::Scene;
use expint::transport::Evaluator;
use expint::trefoil::{commutator_demo, signed_connection, signed_word, zeta6, TrefoilScene, DELTA};
use expint::{Algebra, Complex64, ExpSum, ExpWord, Exponent, FormId, FormModule, Path, Result, Settings};
use serde::Serialize;

pub const SUITES: [&str; 4] = ["transport", "hopf", "homotopy", "trefoil"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed (scaled) deviation.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    cases: usize,
    skipped: usize,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tally {
            name,
            tolerance,
            worst: 0.0,
            cases: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        // NaN must fail.
        if deviation.is_nan() || deviation > self.worst {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    fn exact(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.to_string(),
            passed: self.cases > 0 && self.worst <= self.tolerance,
            worst: self.worst,
            tolerance: self.tolerance,
            cases: self.cases,
            skipped: self.skipped,
        }
    }
}

pub fn run(suite: &str, scene: &Scene, settings: Settings, seed: u64) -> Result<Option<SuiteReport>> {
    let checks = match suite {
        "transport" => transport(scene, settings)?,
        "hopf" => hopf(scene, settings)?,
        "homotopy" => homotopy(scene, settings, seed)?,
        "trefoil" => trefoil(settings)?,
        _ => return Ok(None),
    };
    Ok(Some(SuiteReport {
        suite: suite.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }))
}

fn scaled(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Ordinary words of length `1..=max_len` over `forms`.
fn ordinary_words(forms: &[FormId], max_len: usize) -> Vec<Vec<FormId>> {
    let mut out: Vec<Vec<FormId>> = Vec::new();
    let mut layer: Vec<Vec<FormId>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                forms.iter().map(move |f| {
                    let mut v = w.clone();
                    v.push(f.clone());
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn first_forms(scene: &Scene, n: usize) -> Vec<FormId> {
    scene.table.ids().take(n).cloned().collect()
}

fn module_exponents(scene: &Scene) -> Vec<Exponent> {
    let mut out = vec![Exponent::zero()];
    if let Some(m) = &scene.module {
        for g in &m.generators {
            out.push(Exponent::single(g.clone()));
            out.push(Exponent::scaled(g.as_str(), -1));
        }
    }
    out
}

/// Exponential words of length `<= max_len` with exponents in the module.
fn exp_words(scene: &Scene, linears: &[FormId], max_len: usize) -> Vec<ExpWord> {
    let exps = module_exponents(scene);
    let mut out = Vec::new();
    for e in &exps {
        if !e.is_zero() {
            out.push(ExpWord::exponential(e.clone()));
        }
    }
    for lin in ordinary_words(linears, max_len) {
        let mut partial: Vec<Vec<Exponent>> = vec![Vec::new()];
        for _ in 0..=lin.len() {
            partial = partial
                .iter()
                .flat_map(|v| {
                    exps.iter().map(move |e| {
                        let mut v = v.clone();
                        v.push(e.clone());
                        v
                    })
                })
                .collect();
        }
        for es in partial {
            out.push(ExpWord::new(es, lin.clone()).expect("shape matches"));
        }
    }
    out
}

fn sample_paths(scene: &Scene) -> Vec<(&str, &Path)> {
    scene.paths.iter().map(|(n, p)| (n.as_str(), p)).collect()
}

fn loop_pair(scene: &Scene) -> Option<(Path, Path)> {
    let names: Vec<&str> = scene.family.names().collect();
    match names.as_slice() {
        [] => None,
        [a] => {
            let a = scene.family.generator(a).ok()?.clone();
            Some((a.clone(), a))
        }
        [a, b, ..] => Some((scene.family.generator(a).ok()?.clone(), scene.family.generator(b).ok()?.clone())),
    }
}

fn transport(scene: &Scene, settings: Settings) -> Result<Vec<Check>> {
    let ev = scene.evaluator(settings);
    let forms = first_forms(scene, 3);
    let words = ordinary_words(&forms, 2);
    let paths = sample_paths(scene);

    let mut oracle = Tally::new("ode_vs_quadrature", 1e-6);
    let mut reparam = Tally::new("reparametrization", 1e-7);
    let mut inverse = Tally::new("inverse_cancellation", 1e-7);
    for (_, p) in &paths {
        let slow = p.reparametrize("s^2")?;
        let there_and_back = p.concat(&p.inverse())?;
        for w in &words {
            let v = ev.iterated_integral(w, p)?;
            oracle.record(scaled(ev.iterated_integral_quadrature(w, p, settings.subdivisions)?, v));
            reparam.record(scaled(ev.iterated_integral(w, &slow)?, v));
            inverse.record(ev.iterated_integral(w, &there_and_back)?.norm());
        }
    }

    let mut period = Tally::new("exponential_of_period", 1e-9);
    let mut series = Tally::new("series_vs_ode", 1e-8);
    for id in &forms {
        if !ev.table().get(id)?.closed {
            continue;
        }
        let char_word = ExpWord::exponential(Exponent::single(id.clone()));
        for (_, p) in &paths {
            let expected = ev.iterated_integral(std::slice::from_ref(id), p)?.exp();
            period.record(scaled(ev.exp_integral(&char_word, p)?, expected));
            for lin in std::iter::once(None).chain(forms.iter().map(Some)) {
                let w = match lin {
                    None => char_word.clone(),
                    Some(f) => ExpWord::new(vec![Exponent::single(id.clone()), Exponent::zero()], vec![f.clone()])?,
                };
                let tail = ev.series_tail_bound(&w, p, settings.max_degree)?;
                if tail > series.tolerance / 2.0 {
                    series.skipped += 1;
                    continue;
                }
                let (s, _) = ev.exp_series_truncated(&w, p, settings.max_degree)?;
                series.record((s - ev.exp_integral(&w, p)?).norm());
            }
        }
    }
    Ok(vec![oracle.finish(), reparam.finish(), inverse.finish(), period.finish(), series.finish()])
}

fn hopf(scene: &Scene, settings: Settings) -> Result<Vec<Check>> {
    let ev = scene.evaluator(settings);
    let words = exp_words(scene, &first_forms(scene, 2), 2);

    let mut coassoc = Tally::new("coassociativity", 0.0);
    let mut counit = Tally::new("counit", 0.0);
    let mut involution = Tally::new("antipode_involution", 0.0);
    for w in &words {
        let t = coproduct(w);
        coassoc.exact(t.coproduct_left() == t.coproduct_right());
        let mut left = ExpSum::zero();
        let mut right = ExpSum::zero();
        for (l, r, c) in t.terms() {
            left.add_word(r.clone(), c * counit_word(l));
            right.add_word(l.clone(), c * counit_word(r));
        }
        let target = ExpSum::word(w.clone());
        counit.exact(left == target && right == target);
        involution.exact(antipode_sum(&antipode_sum(&target)) == target);
    }

    let mut concat = Tally::new("coproduct_concatenation", 1e-7);
    let mut antipode_law = Tally::new("antipode_law", 1e-7);
    let mut closure = Tally::new("product_closure", 1e-7);
    if let Some((alpha, beta)) = loop_pair(scene) {
        let ab = alpha.concat(&beta)?;
        for w in &words {
            let v = ev.evaluate_word(w, &ab)?;
            concat.record(scaled(ev.evaluate_tensor(&coproduct(w), &alpha, &beta)?, v));
            let (sign, s) = antipode(w);
            inverse_check(&ev, w, sign, &s, &alpha, &mut antipode_law)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, r, c) in left_times_antipode_right(&coproduct(w)) {
                acc += ev.evaluate_word(&l, &alpha)? * ev.evaluate_word(&r, &alpha)? * c;
            }
            antipode_law.record((acc - counit_word(w)).norm());
        }
        let module = match &scene.module {
            Some(m) => m.clone(),
            None => FormModule::new("L", Vec::new(), &scene.table)?,
        };
        let alg = Algebra::new(module);
        let small: Vec<&ExpWord> = words.iter().filter(|w| w.length() <= 1).collect();
        for a in &small {
            for b in &small {
                let prod = alg.product_words(a, b)?;
                let expected = ev.evaluate_word(a, &alpha)? * ev.evaluate_word(b, &alpha)?;
                closure.record(scaled(ev.evaluate(&prod, &alpha)?, expected));
            }
        }
    }
    Ok(vec![
        coassoc.finish(),
        counit.finish(),
        involution.finish(),
        concat.finish(),
        antipode_law.finish(),
        closure.finish(),
    ])
}

/// `<S w, lambda> = <w, lambda^-1>`.
fn inverse_check(ev: &Evaluator, w: &ExpWord, sign: i32, s: &ExpWord, path: &Path, tally: &mut Tally) -> Result<()> {
    let lhs = ev.evaluate_word(s, path)? * sign as f64;
    let rhs = ev.evaluate_word(w, &path.inverse())?;
    tally.record(scaled(lhs, rhs));
    Ok(())
}

fn homotopy(scene: &Scene, settings: Settings, seed: u64) -> Result<Vec<Check>> {
    let ev = scene.evaluator(settings);
    let spec = PerturbationSpec {
        seed,
        ..PerturbationSpec::default()
    };
    let generators: Vec<FormId> = scene.module.as_ref().map(|m| m.generators.clone()).unwrap_or_default();
    let loops: Vec<&str> = scene.family.names().collect();

    let mut probe = Tally::new("closedness_probe", 1e-6);
    let mut character = Tally::new("character", 1e-8);
    let mut additivity = Tally::new("abelianization", 1e-9);
    for d in &generators {
        let sums = [
            ExpSum::word(ExpWord::exponential(Exponent::single(d.clone()))),
            ExpSum::word(ExpWord::ordinary(std::slice::from_ref(d))),
        ];
        for name in &loops {
            let path = scene.family.generator(name)?;
            for s in &sums {
                let r = closedness_probe(&ev, s, path, &spec, 8)?;
                probe.record(r.max_deviation / r.scale);
            }
        }
        if let Some((a, b)) = loop_pair(scene) {
            let r = character_check(&ev, d, &a, &b)?;
            character.record(r.homomorphism_error.max(r.commutator_error));
        }
        for name in scene.paths.keys() {
            let word = scene.file.paths.iter().find(|p| &p.name == name).and_then(|p| p.word.clone());
            let Some(word) = word else { continue };
            let word = LoopWord::parse(&word)?;
            let total = ev.iterated_integral(std::slice::from_ref(d), scene.path(name)?)?;
            let mut expected = Complex64::new(0.0, 0.0);
            for (g, k) in word.abelianization() {
                expected += ev.iterated_integral(std::slice::from_ref(d), scene.family.generator(&g)?)? * k as f64;
            }
            additivity.record(scaled(total, expected));
        }
    }
    Ok(vec![probe.finish(), character.finish(), additivity.finish()])
}

fn trefoil(settings: Settings) -> Result<Vec<Check>> {
    let scene = TrefoilScene::new(settings)?;
    let ev = scene.base();
    let delta = FormId::new(DELTA);
    let third = Complex64::new(0.0, std::f64::consts::PI / 3.0);

    let mut winding = Tally::new("meridian_delta", 1e-9);
    let mut characters = Tally::new("meridian_character", 1e-8);
    for name in ["a", "b", "c"] {
        let m = scene.meridians().generator(name)?;
        winding.record((ev.iterated_integral(std::slice::from_ref(&delta), m)? - third).norm());
        winding.record((scene.delta_by_winding(m)? - third).norm());
        let e = ev.exp_integral(&ExpWord::exponential(Exponent::single(delta.clone())), m)?;
        characters.record((e - zeta6()).norm());
    }

    let mut braid = Tally::new("braid_relation", 1e-6);
    let words = [LoopWord::parse("a b a")?, LoopWord::parse("b a b")?];
    for signs in [vec![-1], vec![1], vec![-1, 1]] {
        let m = monodromy(ev, &signed_connection(&signs), scene.meridians(), &words)?;
        braid.record((&m[&words[0]] - &m[&words[1]]).norm());
    }

    let mut reduction = Tally::new("pullback_reduction", 1e-6);
    for lw in ["a b^-1", "a b a^-1 b^-1"] {
        let path = scene.loop_path(lw)?;
        for signs in [vec![-1], vec![1, -1]] {
            reduction.record(scene.reduction_check(&signed_word(&signs), &path)?.deviation);
        }
    }

    let demo = commutator_demo(&scene, 2, 1, 1, 30)?;
    let mut commutator = Tally::new("commutator_invisible_to_delta", 1e-9);
    commutator.record(demo.delta_value.norm());
    let mut separation = Tally::new("commutator_separated", 1e-6);
    match &demo.winner {
        Some(w) => separation.record(w.cross_check),
        None => separation.record(f64::INFINITY),
    }
    Ok(vec![
        winding.finish(),
        characters.finish(),
        braid.finish(),
        reduction.finish(),
        commutator.finish(),
        separation.finish(),
    ])
}

use expint::homotopy::{
    character_check, closedness_probe, independence_check, monodromy, separation_experiment, LoopFamily, LoopWord,
    PerturbationSpec, SEPARATION_THRESHOLD,
};
use expint::transport::upper_transport_words;
use expint::{Complex64, Connection, Domain, Evaluator, ExpSum, ExpWord, Exponent, FormId, FormTable, Path, Settings};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `C minus {0, 2}` based at 1, with loops `p` around 0 and `q` around 2.
fn setup() -> (Evaluator, LoopFamily) {
    let base = vec![c(1.0, 0.0)];
    let mut t = FormTable::new(Domain::with_excluded_str(&["z"], "z*(z - 2)", base.clone()).unwrap());
    t.define("d0", &["1/z"], true).unwrap();
    t.define("d2", &["1/(z - 2)"], true).unwrap();
    t.define("om", &["1/(z*(z - 2))"], true).unwrap();
    let mut family = LoopFamily::new(base);
    family.add("p", Path::from_exprs(&["exp(2*pi*i*s)"]).unwrap()).unwrap();
    family.add("q", Path::from_exprs(&["2 - exp(2*pi*i*s)"]).unwrap()).unwrap();
    (Evaluator::new(t, Settings::default()), family)
}

#[test]
fn loop_words() {
    let w = LoopWord::parse("p q^-1 p^2").unwrap();
    assert_eq!(w.to_string(), "p q^-1 p^2");
    assert_eq!(w.inverse().inverse(), w);
    assert!(LoopWord::parse("1").unwrap().is_trivial());
    let comm = LoopWord::commutator(&LoopWord::parse("p").unwrap(), &LoopWord::parse("q").unwrap());
    assert!(comm.abelianization().values().all(|k| *k == 0));
    assert!(LoopWord::parse("p^").is_err());
}

#[test]
fn closed_integrals_survive_perturbation() {
    let (ev, family) = setup();
    let spec = PerturbationSpec::default();
    let p = family.generator("p").unwrap();
    let r = closedness_probe(&ev, &ExpSum::word(ExpWord::exponential(Exponent::single("d0"))), p, &spec, 8).unwrap();
    assert!(r.max_deviation < 1e-7 && r.passed);
    let constant = Path::constant(&[c(1.0, 0.0)]);
    let still = PerturbationSpec {
        amplitude: 0.0,
        ..spec
    };
    let r = closedness_probe(&ev, &ExpSum::word(ExpWord::ordinary(&[FormId::new("om")])), &constant, &still, 4).unwrap();
    assert_eq!(r.max_deviation, 0.0);
}

#[test]
fn non_closed_forms_are_detected() {
    let base = vec![c(0.5, 0.0), c(0.0, 0.0)];
    let mut t = FormTable::new(Domain::new(&["x", "y"], None, base.clone()).unwrap());
    t.define("x_dy", &["0", "x"], false).unwrap();
    let ev = Evaluator::new(t, Settings::default());
    let circle = Path::from_exprs(&["0.5*cos(2*pi*s)", "0.5*sin(2*pi*s)"]).unwrap();
    let r = closedness_probe(&ev, &ExpSum::word(ExpWord::ordinary(&[FormId::new("x_dy")])), &circle, &PerturbationSpec::default(), 16).unwrap();
    assert!(r.max_deviation > 1e-3);
    // A non-closed exponent is refused outright.
    let bad = ExpSum::word(ExpWord::exponential(Exponent::single("x_dy")));
    assert!(closedness_probe(&ev, &bad, &circle, &PerturbationSpec::default(), 4).is_err());
}

#[test]
fn characters() {
    let (ev, family) = setup();
    let r = character_check(&ev, &FormId::new("d0"), family.generator("p").unwrap(), family.generator("q").unwrap()).unwrap();
    assert!(r.passed);
    assert!((r.value_a - c(1.0, 0.0)).norm() < 1e-8, "e^(2 pi i) = 1");
    let constant = Path::constant(&[c(1.0, 0.0)]);
    let v = ev.exp_integral(&ExpWord::exponential(Exponent::single("d0")), &constant).unwrap();
    assert_eq!(v, c(1.0, 0.0));
}

#[test]
fn monodromy_identities() {
    let (ev, family) = setup();
    let mut conn = Connection::zero(2);
    conn.set_diagonal(0, Exponent::single("d0")).unwrap();
    conn.set_diagonal(1, Exponent::scaled("d2", 2)).unwrap();
    conn.set_upper(0, 1, FormId::new("om")).unwrap();
    let words: Vec<LoopWord> = ["1", "p p^-1", "p q", "q p"].iter().map(|w| LoopWord::parse(w).unwrap()).collect();
    let m = monodromy(&ev, &conn, &family, &words).unwrap();
    let id = nalgebra::DMatrix::<Complex64>::identity(2, 2);
    assert!((&m[&words[0]] - &id).norm() < 1e-12);
    assert!((&m[&words[1]] - &id).norm() < 1e-8);
    let symbolic = upper_transport_words(&conn);
    let pq = family.compile(&words[2]).unwrap();
    for i in 0..2 {
        for j in i..2 {
            let v = ev.evaluate(symbolic[i][j].as_ref().unwrap(), &pq).unwrap();
            assert!((v - m[&words[2]][(i, j)]).norm() < 1e-7);
        }
        let character = ev.exp_integral(&ExpWord::exponential(conn.diagonal(i).clone()), &pq).unwrap();
        assert!((character - m[&words[2]][(i, i)]).norm() < 1e-8);
    }
}

#[test]
fn separation_verdicts() {
    let (ev, family) = setup();
    let loops: Vec<LoopWord> = ["1", "p", "p q p^-1 q^-1"].iter().map(|w| LoopWord::parse(w).unwrap()).collect();
    let integrals = vec![ExpSum::word(ExpWord::ordinary(&[FormId::new("d0")])), ExpSum::word(ExpWord::ordinary(&[FormId::new("d0")]))];
    let r = separation_experiment(&ev, &integrals, &family, &loops, SEPARATION_THRESHOLD).unwrap();
    let verdict = |a: &str, b: &str| r.pairs.iter().find(|p| p.left == a && p.right == b).unwrap().separated;
    assert!(verdict("1", "p"));
    assert!(!verdict("1", "p q p^-1 q^-1"), "abelian integrals miss commutators");
    assert_eq!(r.values.len(), 2);
    assert_eq!(r.values[0], r.values[1]);
    // identical loops are never separated
    let same = vec![loops[1].clone(), loops[1].clone()];
    let r = separation_experiment(&ev, &integrals, &family, &same, SEPARATION_THRESHOLD).unwrap();
    assert!(!r.pairs[0].separated);
}

#[test]
fn independence_ranks() {
    let (ev, family) = setup();
    let p = family.generator("p").unwrap().clone();
    let single = vec![ExpSum::word(ExpWord::ordinary(&[FormId::new("d0")]))];
    assert_eq!(independence_check(&ev, &single, std::slice::from_ref(&p)).unwrap().rank, 1);
    let loops: Vec<Path> = ["p", "q", "p q", "q p", "p p q"].iter().map(|w| family.compile_str(w).unwrap()).collect();
    let words: Vec<ExpSum> = [&["d0"][..], &["d2"], &["d0", "d2"]]
        .iter()
        .map(|w| ExpSum::word(ExpWord::ordinary(&w.iter().map(|n| FormId::new(n)).collect::<Vec<_>>())))
        .collect();
    let r = independence_check(&ev, &words, &loops).unwrap();
    assert_eq!(r.rank, 3);
    let mut duplicated = words.clone();
    duplicated.push(words[0].clone());
    let r = independence_check(&ev, &duplicated, &loops).unwrap();
    assert_eq!(r.rank, 3);
    assert!(!r.full_rank);
}

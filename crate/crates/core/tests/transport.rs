use std::f64::consts::PI;

use expint::transport::{chain_count, upper_transport_words, Method};
use expint::{Complex64, Connection, Domain, Error, Evaluator, ExpWord, Exponent, FormId, FormTable, Path, Settings};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ids(names: &[&str]) -> Vec<FormId> {
    names.iter().map(|n| FormId::new(n)).collect()
}

fn real_line() -> Evaluator {
    let mut t = FormTable::new(Domain::new(&["t"], None, vec![c(0.0, 0.0)]).unwrap());
    t.define("dt", &["1"], true).unwrap();
    t.define("t_dt", &["t"], true).unwrap();
    Evaluator::new(t, Settings::default())
}

fn punctured() -> Evaluator {
    let mut t = FormTable::new(Domain::with_excluded_str(&["z"], "z*(z - 2)", vec![c(1.0, 0.0)]).unwrap());
    t.define("d0", &["1/z"], true).unwrap();
    t.define("d2", &["1/(z - 2)"], true).unwrap();
    t.define("z_dz", &["z"], false).unwrap();
    Evaluator::new(t, Settings::default())
}

fn wiggle() -> Path {
    Path::from_exprs(&["1 + 0.6*s + 0.4*i*sin(pi*s)"]).unwrap()
}

#[test]
fn zero_connection_is_identity() {
    let ev = punctured();
    let r = ev.transport_ode(&Connection::zero(3), &wiggle()).unwrap();
    assert!((r.matrix.clone() - nalgebra::DMatrix::identity(3, 3)).norm() < 1e-14);
    assert_eq!(r.method, Method::Ode);
}

#[test]
fn diagonal_entry_is_exponential_of_integral() {
    let ev = punctured();
    let mut conn = Connection::zero(1);
    conn.set_diagonal(0, Exponent::single("d0")).unwrap();
    let p = wiggle();
    let v = ev.transport_ode(&conn, &p).unwrap().matrix[(0, 0)];
    let end = p.end()[0];
    assert!((v - end).norm() < 1e-9, "e^(int dz/z) = z(1)/z(0)");
}

#[test]
fn strictly_upper_entry_is_the_integral() {
    let ev = punctured();
    let mut conn = Connection::zero(2);
    conn.set_upper(0, 1, FormId::new("z_dz")).unwrap();
    let p = wiggle();
    let m = ev.transport_ode(&conn, &p).unwrap().matrix;
    let end = p.end()[0];
    assert!((m[(0, 1)] - (end * end - 1.0) / 2.0).norm() < 1e-9);
    assert!((m[(0, 0)] - 1.0).norm() < 1e-12 && (m[(1, 1)] - 1.0).norm() < 1e-12 && m[(1, 0)].norm() < 1e-12);
    assert!(conn.set_upper(1, 0, FormId::new("z_dz")).is_err());
}

#[test]
fn simplex_volumes() {
    let ev = real_line();
    let p = Path::from_exprs(&["s"]).unwrap();
    let dt = FormId::new("dt");
    let two = ev.iterated_integral(&[dt.clone(), dt.clone()], &p).unwrap();
    let three = ev.iterated_integral(&[dt.clone(), dt.clone(), dt.clone()], &p).unwrap();
    assert!((two - 0.5).norm() < 1e-10);
    assert!((three - 1.0 / 6.0).norm() < 1e-10);
    assert!((ev.iterated_integral_quadrature(&[dt.clone(), dt.clone()], &p, 64).unwrap() - 0.5).norm() < 1e-13);
    assert_eq!(ev.iterated_integral_quadrature(&[], &p, 64).unwrap(), c(1.0, 0.0));
    assert!(matches!(
        ev.iterated_integral_quadrature(&vec![dt; 5], &p, 4),
        Err(Error::UnsupportedOracle { max: 4, got: 5 })
    ));
}

#[test]
fn residue_on_unit_circle() {
    let mut t = FormTable::new(Domain::with_excluded_str(&["z"], "z", vec![c(1.0, 0.0)]).unwrap());
    t.define("dlog", &["1/z"], true).unwrap();
    let ev = Evaluator::new(t, Settings::default());
    let circle = Path::from_exprs(&["exp(2*pi*i*s)"]).unwrap();
    let v = ev.iterated_integral(&ids(&["dlog"]), &circle).unwrap();
    assert!((v - c(0.0, 2.0 * PI)).norm() < 1e-9);
}

#[test]
fn exponential_words() {
    let ev = punctured();
    let p = wiggle();
    let e = ev.exp_integral(&ExpWord::exponential(Exponent::single("d0")), &p).unwrap();
    assert!((e - p.end()[0]).norm() < 1e-9);
    // zero exponents reduce to the ordinary integral
    let w = ExpWord::ordinary(&ids(&["z_dz", "d2"]));
    assert!((ev.exp_integral(&w, &p).unwrap() - ev.iterated_integral(&ids(&["z_dz", "d2"]), &p).unwrap()).norm() < 1e-12);
    // constant loop
    let constant = Path::constant(&[c(1.0, 0.5)]);
    let long = ExpWord::new(vec![Exponent::single("d0"), Exponent::single("d2")], ids(&["z_dz"])).unwrap();
    assert_eq!(ev.exp_integral(&long, &constant).unwrap(), c(0.0, 0.0));
    assert_eq!(ev.exp_integral(&ExpWord::exponential(Exponent::single("d0")), &constant).unwrap(), c(1.0, 0.0));
}

#[test]
fn multiplicativity() {
    let ev = punctured();
    let mut conn = Connection::zero(3);
    conn.set_diagonal(0, Exponent::single("d0")).unwrap();
    conn.set_diagonal(2, Exponent::scaled("d2", -1)).unwrap();
    conn.set_upper(0, 1, FormId::new("z_dz")).unwrap();
    conn.set_upper(1, 2, FormId::new("d2")).unwrap();
    conn.set_upper(0, 2, FormId::new("d0")).unwrap();
    let alpha = wiggle();
    let beta = Path::from_exprs(&["1.6 - 0.9*i*s + 0.3*sin(pi*s)"]).unwrap();
    let t = |p: &Path| ev.transport_ode(&conn, p).unwrap().matrix;
    let ab = t(&alpha.concat(&beta).unwrap());
    assert!((ab - t(&alpha) * t(&beta)).norm() < 1e-8);
}

#[test]
fn series_truncation() {
    let ev = punctured();
    let p = wiggle();
    let char_word = ExpWord::exponential(Exponent::single("d0"));
    assert_eq!(ev.exp_series_truncated(&char_word, &p, 0).unwrap().0, c(1.0, 0.0));
    let (s, tail) = ev.exp_series_truncated(&char_word, &p, 25).unwrap();
    assert!((s - ev.exp_integral(&char_word, &p).unwrap()).norm() < 1e-8);
    assert!(tail < 1e-8);
    // zero exponents are exact at m = 0
    let w = ExpWord::ordinary(&ids(&["z_dz"]));
    let (s0, _) = ev.exp_series_truncated(&w, &p, 0).unwrap();
    assert!((s0 - ev.iterated_integral(&ids(&["z_dz"]), &p).unwrap()).norm() < 1e-10);
}

#[test]
fn upper_words_match_transport() {
    let ev = punctured();
    let mut conn = Connection::zero(3);
    conn.set_diagonal(0, Exponent::single("d0")).unwrap();
    conn.set_diagonal(1, Exponent::single("d2")).unwrap();
    conn.set_upper(0, 1, FormId::new("z_dz")).unwrap();
    conn.set_upper(1, 2, FormId::new("d2")).unwrap();
    conn.set_upper(0, 2, FormId::new("d0")).unwrap();
    let words = upper_transport_words(&conn);
    assert_eq!(chain_count(&conn, 0, 2), 2);
    assert_eq!(words[0][2].as_ref().unwrap().len(), 2);
    assert!(words[2][0].is_none());
    let p = wiggle();
    let m = ev.transport_ode(&conn, &p).unwrap().matrix;
    for i in 0..3 {
        for j in i..3 {
            let v = ev.evaluate(words[i][j].as_ref().unwrap(), &p).unwrap();
            assert!((v - m[(i, j)]).norm() < 1e-8, "entry ({i}, {j})");
        }
    }
}

#[test]
fn concatenation_identity_at_midpoint() {
    let ev = punctured();
    let p = wiggle();
    let w = ExpWord::new(vec![Exponent::single("d0"), Exponent::zero(), Exponent::single("d2")], ids(&["z_dz", "d2"])).unwrap();
    let (first, second) = (p.subpath(0.0, 0.5), p.subpath(0.5, 1.0));
    let mut sum = c(0.0, 0.0);
    for i in 0..w.exponents().len() {
        sum += ev.evaluate_word(&w.prefix(i), &first).unwrap() * ev.evaluate_word(&w.suffix(i), &second).unwrap();
    }
    assert!((sum - ev.exp_integral(&w, &p).unwrap()).norm() < 1e-7);
}

#[test]
fn paths_through_the_locus_are_rejected() {
    let ev = punctured();
    let bad = Path::from_exprs(&["1 - 2*s"]).unwrap();
    assert!(ev.iterated_integral(&ids(&["d0"]), &bad).is_err());
}

use expint::hopf::{antipode, antipode_sum, coproduct, counit, counit_word, exact_exponent_reduce};
use expint::{
    Algebra, Complex64, Domain, Error, Evaluator, ExpSum, ExpWord, Expr, FormId, FormModule, FormTable, Path, Settings,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn w(s: &str) -> ExpWord {
    ExpWord::parse(s).unwrap()
}

fn sum(s: &str) -> ExpSum {
    ExpSum::parse(s).unwrap()
}

fn table() -> FormTable {
    let mut t = FormTable::new(Domain::with_excluded_str(&["z"], "z*(z - 2)", vec![c(1.0, 0.0)]).unwrap());
    t.define("d", &["1/z"], true).unwrap();
    t.define("e", &["1/(z - 2)"], true).unwrap();
    t.define("om", &["z"], false).unwrap();
    t.define("eta", &["exp(z/3)"], false).unwrap();
    t
}

fn algebra(t: &FormTable) -> Algebra {
    Algebra::new(FormModule::new("L", vec![FormId::new("d"), FormId::new("e")], t).unwrap())
}

fn paths(n: usize) -> Vec<Path> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            Path::from_exprs(&[&format!("1 + {}*s + {}*i*sin(pi*s) + 0.1*sin({}*pi*s)", 0.3 + 0.05 * k, 0.5 - 0.1 * k, k + 2.0)]).unwrap()
        })
        .collect()
}

#[test]
fn coproduct_of_character_is_grouplike() {
    let t = coproduct(&w("e{d}"));
    let terms: Vec<_> = t.terms().collect();
    assert_eq!(terms.len(), 1);
    assert_eq!((terms[0].0, terms[0].1), (&w("e{d}"), &w("e{d}")));
}

#[test]
fn coproduct_of_length_one_word() {
    let t = coproduct(&w("e{d} om e{e}"));
    let terms: Vec<(String, String)> = t.terms().map(|(l, r, _)| (l.to_string(), r.to_string())).collect();
    assert_eq!(
        terms,
        vec![
            ("e{d}".to_string(), "e{d} om e{e}".to_string()),
            ("e{d} om e{e}".to_string(), "e{e}".to_string()),
        ]
    );
}

#[test]
fn antipode_examples() {
    assert_eq!(antipode(&w("e{d}")), (1, w("e{-d}")));
    assert_eq!(antipode(&w("e{d} om e{e}")), (-1, w("e{-e} om e{-d}")));
    let s = sum("2 + 3 e{d} om e{e}");
    assert_eq!(antipode_sum(&antipode_sum(&s)), s);
}

#[test]
fn counit_examples() {
    assert_eq!(counit_word(&w("e{d}")), c(1.0, 0.0));
    assert_eq!(counit_word(&w("e{d} om e{e}")), c(0.0, 0.0));
    assert_eq!(counit(&sum("2 + 3 e{d} - om")), c(5.0, 0.0));
}

#[test]
fn product_base_case_and_unit() {
    let t = table();
    let alg = algebra(&t);
    assert_eq!(alg.product(&sum("e{d}"), &sum("e{e}")).unwrap(), sum("e{d+e}"));
    let a = sum("e{d} om e{-e} + 2 eta");
    assert_eq!(alg.product(&ExpSum::one(), &a).unwrap(), a);
    assert_eq!(alg.product(&a, &ExpSum::one()).unwrap(), a);
}

#[test]
fn zero_exponent_product_is_the_shuffle() {
    let t = table();
    let alg = algebra(&t);
    let ev = Evaluator::new(t.clone(), Settings::default());
    let p = alg.product(&sum("om"), &sum("eta")).unwrap();
    assert_eq!(p, sum("om eta + eta om"));
    for path in paths(10) {
        let lhs = ev.evaluate(&p, &path).unwrap();
        let rhs = ev.evaluate(&sum("om"), &path).unwrap() * ev.evaluate(&sum("eta"), &path).unwrap();
        assert!((lhs - rhs).norm() < 1e-7);
    }
}

#[test]
fn product_is_commutative_and_associative() {
    let t = table();
    let alg = algebra(&t);
    let ev = Evaluator::new(t.clone(), Settings::default());
    let (a, b, d) = (sum("e{d} om"), sum("eta e{-e}"), sum("e{e} om e{d}"));
    assert_eq!(alg.product(&a, &b).unwrap(), alg.product(&b, &a).unwrap());
    let left = alg.product(&alg.product(&a, &b).unwrap(), &d).unwrap();
    let right = alg.product(&a, &alg.product(&b, &d).unwrap()).unwrap();
    for path in paths(3) {
        let l = ev.evaluate(&left, &path).unwrap();
        let r = ev.evaluate(&right, &path).unwrap();
        assert!((l - r).norm() < 1e-7);
    }
    assert!(left.length() <= a.length() + b.length() + d.length());
}

#[test]
fn product_outside_module_is_rejected() {
    let t = table();
    let alg = algebra(&t);
    assert!(matches!(alg.product(&sum("e{om}"), &sum("e{d}")), Err(Error::ModuleClosure(_))));
}

#[test]
fn exact_reduction() {
    let mut t = table();
    let g0 = Expr::zero();
    let word = w("om eta");
    let same = exact_exponent_reduce(&mut t, &word, 1, &g0).unwrap();
    assert_eq!(same.word, word);

    // d = d(log z) is exact on the simply connected paths used here.
    let g = Expr::parse("log(z)", &["z"]).unwrap();
    let ev = Evaluator::new(t.clone(), Settings::default());
    let target = w("om e{d} eta");
    let reduced = exact_exponent_reduce(&mut t, &target, 1, &g).unwrap();
    let ev2 = ev.with_table(t.clone());
    for path in paths(5) {
        let a = ev.exp_integral(&target, &path).unwrap();
        let b = reduced.evaluate(&ev2, &path).unwrap();
        assert!((a - b).norm() < 1e-7);
    }
    let x = Expr::parse("z", &["z"]).unwrap();
    assert!(matches!(exact_exponent_reduce(&mut t, &target, 1, &x), Err(Error::NotExact(_))));
    assert!(matches!(exact_exponent_reduce(&mut t, &target, 7, &x), Err(Error::Position { .. })));
}

#[test]
fn evaluate_unit_and_parse_errors() {
    let ev = Evaluator::new(table(), Settings::default());
    assert_eq!(ev.evaluate(&ExpSum::one(), &paths(1)[0]).unwrap(), c(1.0, 0.0));
    assert!(matches!(ExpSum::parse("e{d} e{e}"), Err(Error::Parse { pos: 5, .. })));
    assert!(ExpSum::parse("e{d").is_err());
    assert!(ev.evaluate(&sum("zz"), &paths(1)[0]).is_err());
}

use expint::homotopy::LoopWord;
use expint::hopf::{antipode, coproduct};
use expint::{
    Algebra, Complex64, Connection, Domain, Evaluator, ExpSum, ExpWord, Exponent, FormId, FormModule, FormTable, Path,
    Settings,
};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn table() -> FormTable {
    let mut t = FormTable::new(Domain::with_excluded_str(&["z"], "z*(z - 2)", vec![c(1.0, 0.0)]).unwrap());
    t.define("d", &["1/z"], true).unwrap();
    t.define("e", &["1/(z - 2)"], true).unwrap();
    t.define("om", &["z"], false).unwrap();
    t.define("eta", &["1/(z + 1)"], false).unwrap();
    t
}

fn exponent() -> impl Strategy<Value = Exponent> {
    (-2i64..=2, -2i64..=2).prop_map(|(a, b)| Exponent::scaled("d", a).add(&Exponent::scaled("e", b)))
}

fn linear() -> impl Strategy<Value = FormId> {
    prop::sample::select(vec!["d", "e", "om", "eta"]).prop_map(FormId::new)
}

fn word(max: usize) -> impl Strategy<Value = ExpWord> {
    (0..=max).prop_flat_map(|n| {
        (prop::collection::vec(exponent(), n + 1), prop::collection::vec(linear(), n))
            .prop_map(|(e, l)| ExpWord::new(e, l).unwrap())
    })
}

fn sum() -> impl Strategy<Value = ExpSum> {
    prop::collection::vec((word(3), -4i32..=4, -2i32..=2), 0..4).prop_map(|terms| {
        let mut s = ExpSum::zero();
        for (w, re, im) in terms {
            s.add_word(w, c(re as f64, im as f64 / 2.0));
        }
        s
    })
}

/// A path from 1 in the upper half plane, clear of both punctures.
fn path() -> impl Strategy<Value = Path> {
    (0.2f64..0.8, 0.2f64..0.9, -0.15f64..0.15)
        .prop_map(|(dx, h, w)| Path::from_exprs(&[&format!("1 + {dx}*s + {h}*i*sin(pi*s) + {w}*sin(2*pi*s)")]).unwrap())
}

fn loop_word() -> impl Strategy<Value = LoopWord> {
    prop::collection::vec((prop::sample::select(vec!["p", "q", "r"]), -3i32..=3), 0..6).prop_map(|v| {
        let text: Vec<String> = v.iter().filter(|(_, k)| *k != 0).map(|(n, k)| format!("{n}^{k}")).collect();
        let joined = if text.is_empty() { "1".to_string() } else { text.join(" ") };
        LoopWord::parse(&joined).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn display_parse_round_trip(s in sum()) {
        prop_assert_eq!(ExpSum::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn coproduct_is_coassociative(w in word(4)) {
        let d = coproduct(&w);
        prop_assert_eq!(d.coproduct_left(), d.coproduct_right());
    }

    #[test]
    fn coproduct_splits_length(w in word(5)) {
        let d = coproduct(&w);
        prop_assert_eq!(d.len(), w.length() + 1);
        for (l, r, k) in d.terms() {
            prop_assert_eq!(l.length() + r.length(), w.length());
            prop_assert_eq!(k, c(1.0, 0.0));
        }
    }

    #[test]
    fn antipode_is_a_signed_involution(w in word(5)) {
        let (sign, image) = antipode(&w);
        prop_assert_eq!(sign, if w.length() % 2 == 0 { 1 } else { -1 });
        prop_assert_eq!(image.length(), w.length());
        let (back_sign, back) = antipode(&image);
        prop_assert_eq!(sign * back_sign, 1);
        prop_assert_eq!(back, w);
    }

    #[test]
    fn product_is_commutative_and_filtered(a in word(2), b in word(2)) {
        let t = table();
        let alg = Algebra::new(FormModule::new("L", vec![FormId::new("d"), FormId::new("e")], &t).unwrap());
        let ab = alg.product_words(&a, &b).unwrap();
        prop_assert_eq!(&ab, &alg.product_words(&b, &a).unwrap());
        prop_assert!(ab.length() <= a.length() + b.length());
    }

    #[test]
    fn loop_word_group_laws(u in loop_word(), v in loop_word()) {
        prop_assert_eq!(u.inverse().inverse(), u.clone());
        prop_assert!(u.concat(&u.inverse()).abelianization().is_empty());
        let (au, av, auv) = (u.abelianization(), v.abelianization(), u.concat(&v).abelianization());
        for name in ["p", "q", "r"] {
            let get = |m: &std::collections::BTreeMap<String, i32>| m.get(name).copied().unwrap_or(0);
            prop_assert_eq!(get(&auv), get(&au) + get(&av));
        }
        prop_assert_eq!(LoopWord::parse(&u.to_string()).unwrap(), u);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transport_is_multiplicative(alpha in path(), h in 0.2f64..0.6) {
        let ev = Evaluator::new(table(), Settings::default());
        let mut conn = Connection::zero(3);
        conn.set_diagonal(0, Exponent::single("d")).unwrap();
        conn.set_diagonal(2, Exponent::scaled("e", -1)).unwrap();
        conn.set_upper(0, 1, FormId::new("om")).unwrap();
        conn.set_upper(1, 2, FormId::new("eta")).unwrap();
        let end = alpha.end()[0];
        let beta = Path::from_exprs(&[&format!("{} + {}*i - ({}*i)*s - {}*i*s", end.re, end.im, end.im, h)]).unwrap();
        let t = |p: &Path| ev.transport_ode(&conn, p).unwrap().matrix;
        let joined = t(&alpha.concat(&beta).unwrap());
        prop_assert!((joined - t(&alpha) * t(&beta)).norm() < 1e-8);
    }

    #[test]
    fn integrals_ignore_reparametrization(w in word(2), a in -0.9f64..0.9, dx in 0.2f64..0.8) {
        let ev = Evaluator::new(table(), Settings::default());
        let sigma = format!("(s + ({a})*s*(1 - s))");
        let curve = |t: &str| format!("1 + {dx}*{t} + 0.5*i*sin(pi*{t})");
        let p = Path::from_exprs(&[&curve("s")]).unwrap();
        let q = Path::from_exprs(&[&curve(&sigma)]).unwrap();
        let (x, y) = (ev.evaluate_word(&w, &p).unwrap(), ev.evaluate_word(&w, &q).unwrap());
        prop_assert!((x - y).norm() < 1e-7 * (1.0 + x.norm()), "{} vs {}", x, y);
    }
}

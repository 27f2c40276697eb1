//! Property tests of the expression and jet calculus against independent
//! oracles: exact central differences, evaluation and re-parsing.

use std::collections::HashMap;

use num_rational::BigRational;
use proptest::prelude::*;

use jetvar::expr::{diff, eval_numeric, substitute, Simplifier, Symbol, Q};
use jetvar::forms::JetForm;
use jetvar::io::{parse_expr_in, Scope};
use jetvar::{Expr, JetSpace};

fn space() -> JetSpace {
    JetSpace::new(2, 1, 2)
}

/// Coordinates the random expressions draw from.
fn pool() -> Vec<Symbol> {
    let sp = space();
    let mut v = vec![Symbol::base(0), Symbol::base(1)];
    v.extend(sp.fiber_coords(0));
    v.extend(sp.fiber_coords(1));
    v.extend(sp.fiber_coords(2));
    v
}

fn q(n: i64, d: i64) -> Q {
    BigRational::new(n.into(), d.into())
}

fn leaf() -> impl Strategy<Value = Expr> {
    let n = pool().len();
    prop_oneof![
        (-4i64..=4, 1i64..=3).prop_map(|(a, b)| Expr::rational(a, b)),
        (0..n).prop_map(move |i| Expr::sym(pool()[i].clone())),
    ]
}

/// Polynomials in the pool, built without normalizing.
fn poly() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::add_all),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::mul_all),
            (inner, 2i64..=3).prop_map(|(b, k)| b.powi(k)),
        ]
    })
}

/// A rational point with entries in `[-2, 2]` and denominators up to 7.
fn point() -> impl Strategy<Value = HashMap<Symbol, Q>> {
    prop::collection::vec((-14i64..=14, 1i64..=7), pool().len())
        .prop_map(|v| pool().into_iter().zip(v).map(|(s, (a, b))| (s, q(a, 2 * b))).collect())
}

fn value(e: &Expr, pt: &HashMap<Symbol, Q>) -> Q {
    eval_numeric(e, pt).unwrap().as_rational().cloned().expect("polynomials evaluate to rationals")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn q_f64(x: &Q) -> f64 {
    jetvar::expr::Numeric::Rational(x.clone()).to_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partials_match_central_differences(e in poly(), pt in point(), k in 0usize..8) {
        let s = pool()[k % pool().len()].clone();
        let h = q(1, 100_000);
        let mut up = pt.clone();
        let mut down = pt.clone();
        *up.get_mut(&s).unwrap() += &h;
        *down.get_mut(&s).unwrap() -= &h;
        let fd = (value(&e, &up) - value(&e, &down)) / (h * q(2, 1));
        let exact = value(&diff(&e, &s), &pt);
        prop_assert!(rel(q_f64(&fd), q_f64(&exact)) < 1e-6, "{} vs {}", fd, exact);
    }

    #[test]
    fn normalize_is_a_homomorphism(a in poly(), b in poly()) {
        let s = Simplifier::default();
        prop_assert_eq!(s.normalize(&(&a + &b)), s.normalize(&(s.normalize(&a) + s.normalize(&b))));
        prop_assert_eq!(s.normalize(&(&a * &b)), s.normalize(&(s.normalize(&a) * s.normalize(&b))));
        prop_assert_eq!(s.normalize(&(&a + &b)), s.normalize(&(&b + &a)));
        prop_assert_eq!(s.normalize(&s.normalize(&a)), s.normalize(&a));
    }

    #[test]
    fn normalize_preserves_values(e in poly(), pt in point()) {
        prop_assert_eq!(value(&Simplifier::default().normalize(&e), &pt), value(&e, &pt));
    }

    #[test]
    fn zero_test_paths_agree(a in poly(), b in poly()) {
        let diff = Simplifier::default().normalize(&(&a * &b)) - &b * &a;
        let exact = Simplifier::default().is_zero(&diff).is_zero;
        let sampled = Simplifier::new(jetvar::expr::ExpansionPolicy::NoExpand).is_zero(&diff).is_zero;
        prop_assert!(exact && sampled);
    }

    #[test]
    fn total_derivatives_commute(e in poly()) {
        let sp = space();
        let s = Simplifier::default();
        let d01 = sp.total_derivative(&sp.total_derivative(&e, 0).unwrap(), 1).unwrap();
        let d10 = sp.total_derivative(&sp.total_derivative(&e, 1).unwrap(), 0).unwrap();
        prop_assert!(s.is_zero(&(d01 - d10)).is_zero);
    }

    #[test]
    fn total_derivative_obeys_leibniz(a in poly(), b in poly(), i in 0usize..2) {
        let sp = space();
        let lhs = sp.total_derivative(&(&a * &b), i).unwrap();
        let rhs = &a * sp.total_derivative(&b, i).unwrap() + &b * sp.total_derivative(&a, i).unwrap();
        prop_assert!(Simplifier::default().is_zero(&(lhs - rhs)).is_zero);
    }

    #[test]
    fn exterior_derivative_squares_to_zero(f in poly(), g in poly(), k in 0usize..8) {
        let s = Simplifier::default();
        prop_assert!(JetForm::function(f.clone()).exterior_derivative().exterior_derivative().is_zero_with(&s));
        let one = JetForm::basis(pool()[k % pool().len()].clone()).scale(&g).add(&JetForm::function(f).exterior_derivative());
        prop_assert!(one.exterior_derivative().exterior_derivative().is_zero_with(&s));
    }

    #[test]
    fn printing_round_trips(e in poly()) {
        let scope = Scope::for_space(&space());
        let n = Simplifier::default().normalize(&e);
        prop_assert_eq!(parse_expr_in(&n.to_string(), &scope).unwrap(), n.clone());
        let raw = parse_expr_in(&e.to_string(), &scope).unwrap();
        prop_assert_eq!(Simplifier::default().normalize(&raw), n);
    }

    #[test]
    fn substitution_matches_evaluation(e in poly(), pt in point(), k in 0usize..8, c in (-6i64..=6)) {
        let s = pool()[k % pool().len()].clone();
        let bound = substitute(&e, &HashMap::from([(s.clone(), Expr::int(c))])).unwrap();
        let mut at = pt.clone();
        at.insert(s, q(c, 1));
        prop_assert_eq!(value(&bound, &pt), value(&e, &at));
    }
}

#[test]
fn total_derivative_matches_sections() {
    // D_i f along j²φ equals ∂_i (f ∘ j²φ), by exact central differences.
    use jetvar::jet::{fd_step, shifted, PolynomialSection};
    use rand::SeedableRng;
    let sp = space();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let e = parse_expr_in("x1*u1_[1,1]^2 + u1_[0,1]*u1_[1,0] - 1/3*u1_[0,0]^3*x2", &Scope::for_space(&sp)).unwrap();
    for _ in 0..10 {
        let sec = PolynomialSection::random(&sp, 4, &mut rng, |_| q(1, 2), 2);
        let x = vec![q(1, 3), q(-1, 5)];
        let h = fd_step();
        for i in 0..2 {
            let f = |y: &[Q]| value(&e, &sec.jet_point(y, 2));
            let fd = (f(&shifted(&x, i, &h)) - f(&shifted(&x, i, &-h.clone()))) / (h.clone() * q(2, 1));
            let exact = value(&sp.total_derivative(&e, i).unwrap(), &sec.jet_point(&x, 3));
            assert!(rel(q_f64(&fd), q_f64(&exact)) < 1e-6);
        }
    }
}

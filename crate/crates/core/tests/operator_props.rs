mod common;

use common::{complex, quartic_operator, quartic_roots, poly, rel_coeff_diff};
use lame_core::operator::LameOperator;
use lame_core::poly::Poly;
use num_complex::Complex64;
use proptest::prelude::*;

/// Order-k operator with `deg Q_i <= i + r` and `deg Q_k = k + r`.
fn operator() -> impl Strategy<Value = LameOperator> {
    (1usize..=4, 0usize..=2).prop_flat_map(|(k, r)| {
        prop::collection::vec(prop::collection::vec(complex(1.0), k + r + 1), k + 1).prop_map(move |mut qs| {
            qs[k][k + r] = Complex64::new(1.0, 0.0);
            let q: Vec<Poly> = qs
                .into_iter()
                .enumerate()
                .map(|(i, mut v)| {
                    v.truncate(i + r + 1);
                    Poly::new(v)
                })
                .collect();
            LameOperator::new(q).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_is_linear(op in operator(), s in poly(10), t in poly(10), a in complex(2.0), b in complex(2.0)) {
        let lhs = op.apply(&s.scale(a).add(&t.scale(b)));
        let rhs = op.apply(&s).scale(a).add(&op.apply(&t).scale(b));
        let scale = lhs.max_coeff_abs().max(rhs.max_coeff_abs()).max(1e-300);
        let d = lhs.degree().unwrap_or(0).max(rhs.degree().unwrap_or(0));
        let err = (0..=d).map(|i| (lhs.coeff(i) - rhs.coeff(i)).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * scale);
    }

    #[test]
    fn degree_raise_is_fuchs_index(op in operator(), extra in 0usize..20) {
        let n = op.order() + extra;
        let a = op.leading_balance(n).unwrap();
        prop_assume!(a.norm() > 1e-9);
        let image = op.apply(&Poly::monomial(n));
        let r = op.fuchs_index() as usize;
        prop_assert_eq!(image.degree(), Some(n + r));
        prop_assert!((image.coeff(n + r) + a).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn composition_matches_differentiation(s in poly(15)) {
        let q = Poly::from_roots(&quartic_roots());
        let direct = q.mul(&s).nth_derivative(3);
        let via_op = quartic_operator().apply(&s);
        prop_assert!(rel_coeff_diff(&via_op, &direct) <= 1e-12);
    }
}

#[test]
fn serde_forms_agree() {
    let q = r#"{"re":[12,-5,13,-5,1],"im":[5,-1,5,-1,0]}"#;
    let a: LameOperator = serde_json::from_str(&format!(r#"{{"k":3,"composition_of":{q}}}"#)).unwrap();
    let b: LameOperator = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fuchs_index(), 1);
    let direct = quartic_operator();
    for i in 0..=3 {
        assert!(rel_coeff_diff(a.coefficient(i), direct.coefficient(i)) < 1e-14);
    }
}

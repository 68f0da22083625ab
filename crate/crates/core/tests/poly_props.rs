mod common;

use common::{c, complex, matched, poly};
use lame_core::poly::{dist_to_hull, ConvexHull, Poly};
use num_complex::Complex64;
use proptest::prelude::*;

fn separated(points: &[Complex64], sep: f64) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, a)| points[i + 1..].iter().all(|b| (a - b).norm() >= sep))
}

fn unit_disk() -> impl Strategy<Value = Complex64> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r.sqrt(), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_round_trip(roots in prop::collection::vec(unit_disk(), 1..=30)) {
        prop_assume!(separated(&roots, 1e-2));
        let found = Poly::from_roots(&roots).roots().unwrap();
        prop_assert!(matched(&found, &roots) <= 1e-7, "error {}", matched(&found, &roots));
    }

    #[test]
    fn eval_is_multiplicative(p in poly(12), q in poly(12), z in complex(2.0)) {
        let lhs = p.mul(&q).eval(z);
        let rhs = p.eval(z) * q.eval(z);
        let scale = p.eval_abs_scale(z) * q.eval_abs_scale(z);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn gauss_lucas(p in poly(20)) {
        prop_assume!(p.degree().unwrap() >= 2);
        let hull = ConvexHull::new(&p.roots().unwrap()).unwrap();
        for z in p.derivative().roots().unwrap() {
            prop_assert!(dist_to_hull(z, &hull) <= 1e-8);
        }
    }

    #[test]
    fn serde_round_trip(p in poly(8)) {
        let text = serde_json::to_string(&p).unwrap();
        let back: Poly = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn hull_of_square_contains_center() {
    let hull = ConvexHull::new(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)]).unwrap();
    assert_eq!(dist_to_hull(c(0.5, 0.5), &hull), 0.0);
    assert!((dist_to_hull(c(2.0, 0.5), &hull) - 1.0).abs() < 1e-15);
}

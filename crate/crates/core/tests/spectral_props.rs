mod common;

use common::{c, quartic_operator, quartic_roots, k1_operator, k2_operator, rel_coeff_diff};
use lame_core::poly::ConvexHull;
use lame_core::spectral::{enumerate, pair_residual};
use proptest::prelude::*;

#[test]
fn closed_form_counts() {
    for n in 1..=25 {
        assert_eq!(enumerate(&k1_operator(), n).unwrap().found_count, n + 1, "k=1, n={n}");
    }
    // for Q = z^3 - z and odd n, b = 0 is a double eigenvalue with a single
    // eigenvector, so only n distinct pairs exist
    for n in 2..=25 {
        let rep = enumerate(&k2_operator(), n).unwrap();
        let distinct = if n % 2 == 0 { n + 1 } else { n };
        assert_eq!(rep.found_count, distinct, "k=2, n={n}");
        if n % 2 == 1 {
            // the defective eigenvalue at zero loses accuracy as n grows
            let closest = rep.pairs.iter().map(|p| p.b().norm()).fold(f64::INFINITY, f64::min);
            assert!(closest < 1e-4, "n={n} closest={closest:e}");
            assert!(!rep.defect_notes.is_empty());
        }
    }
}

#[test]
fn leading_coefficients_and_residuals() {
    for (op, ns) in [(k2_operator(), vec![5, 12, 20]), (quartic_operator(), vec![8, 15, 25])] {
        for n in ns {
            let a = op.leading_balance(n).unwrap();
            for p in enumerate(&op, n).unwrap().pairs {
                assert!((p.v.leading().unwrap() - a).norm() <= 1e-10 * a.norm(), "n={n}");
                assert!(pair_residual(&op, &p.s, &p.v) <= 1e-8, "n={n}");
                assert!(p.residual <= 1e-8);
            }
        }
    }
}

#[test]
fn pairs_sorted_by_free_coefficient() {
    let rep = enumerate(&quartic_operator(), 20).unwrap();
    assert_eq!(rep.found_count, rep.pairs.len());
    for w in rep.pairs.windows(2) {
        let (a, b) = (w[0].b(), w[1].b());
        assert!(a.re < b.re || (a.re == b.re && a.im <= b.im));
    }
}

#[test]
fn localization_quartic() {
    let hull = ConvexHull::new(&quartic_roots()).unwrap();
    for n in [20, 30, 39] {
        for p in enumerate(&quartic_operator(), n).unwrap().pairs {
            for z in p.roots.iter().copied().chain(p.van_vleck_roots()) {
                assert!(hull.distance(z) <= 0.15, "n={n}, z={z}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_covariance(re in -3.0..3.0f64, im in -3.0..3.0f64, half in 1usize..7) {
        let n = 2 * half;
        let s = c(re, im);
        prop_assume!(s.norm() > 0.1);
        let op = k2_operator();
        let base = enumerate(&op, n).unwrap();
        let scaled = enumerate(&op.scaled(s).unwrap(), n).unwrap();
        prop_assert_eq!(base.pairs.len(), scaled.pairs.len());
        for p in &base.pairs {
            let best = scaled
                .pairs
                .iter()
                .map(|q| rel_coeff_diff(&q.s, &p.s).max(rel_coeff_diff(&q.v, &p.v.scale(s))))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-9, "best match {best}");
        }
    }

}

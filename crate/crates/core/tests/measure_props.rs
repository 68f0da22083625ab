mod common;

use common::{c, complex, quartic_operator, quartic_roots, legendre_operator, poly};
use lame_core::measure::{cauchy_of_poly, default_probes, probe_compare, RootMeasure};
use lame_core::poly::{ConvexHull, Poly};
use lame_core::spectral::enumerate;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_is_log_derivative(p in poly(15), z in complex(3.0)) {
        let roots = p.roots().unwrap();
        prop_assume!(roots.iter().all(|r| (z - r).norm() > 1e-2));
        let mu = RootMeasure::from_roots(&roots).unwrap();
        let direct = mu.cauchy(z).unwrap();
        let formula = cauchy_of_poly(&p, z).unwrap();
        let (v, d) = p.eval_with_derivative(z);
        let by_hand = d / (v * roots.len() as f64);
        prop_assert!((direct - formula).norm() <= 1e-10 * formula.norm().max(1.0));
        prop_assert!((formula - by_hand).norm() <= 1e-12 * by_hand.norm().max(1.0));
    }

    #[test]
    fn potential_gradient_is_cauchy(roots in prop::collection::vec(complex(1.0), 1..20), z in complex(3.0)) {
        prop_assume!(roots.iter().all(|r| (z - r).norm() > 0.05));
        let mu = RootMeasure::from_roots(&roots).unwrap();
        let h = 1e-5;
        let dx = (mu.potential(z + c(h, 0.0)).unwrap() - mu.potential(z - c(h, 0.0)).unwrap()) / (2.0 * h);
        let dy = (mu.potential(z + c(0.0, h)).unwrap() - mu.potential(z - c(0.0, h)).unwrap()) / (2.0 * h);
        // 2 d/dz = d/dx - i d/dy
        let grad = c(dx, -dy);
        prop_assert!((grad - mu.cauchy(z).unwrap()).norm() <= 1e-6);
    }

    #[test]
    fn weights_sum_to_one(roots in prop::collection::vec(complex(2.0), 1..40)) {
        let mu = RootMeasure::from_roots(&roots).unwrap();
        prop_assert!((mu.total_mass() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn monotone_localization() {
    let hull = ConvexHull::new(&quartic_roots()).unwrap();
    let mut prev = f64::INFINITY;
    for n in [10, 20, 30, 39] {
        let d = enumerate(&quartic_operator(), n)
            .unwrap()
            .pairs
            .iter()
            .flat_map(|p| p.roots.clone())
            .map(|z| hull.distance(z))
            .fold(0.0, f64::max);
        assert!(d <= prev + 1e-3, "n={n}: {d} after {prev}");
        prev = d;
    }
}

#[test]
fn probe_moduli_within_error_budget() {
    let q = Poly::from_roots(&quartic_roots());
    let probes = default_probes(&q).unwrap();
    for p in enumerate(&quartic_operator(), 25).unwrap().pairs {
        let mu = RootMeasure::from_roots(&p.roots).unwrap();
        let rep = probe_compare(&mu, &p.normalized_v, &q, 3, &probes, 0.5).unwrap();
        for pr in &rep.probes {
            // |lhs - rhs| <= e gives | |lhs|/|rhs| - 1 | <= e / |rhs|
            let delta = rep.max_error / pr.rhs.norm();
            assert!((pr.modulus_ratio - 1.0).abs() <= delta * (1.0 + 1e-12));
        }
    }
}

#[test]
fn legendre_arcsine_transform() {
    let pair = enumerate(&legendre_operator(), 120).unwrap().pairs.remove(0);
    let mu = RootMeasure::from_roots(&pair.roots).unwrap();
    let rep = probe_compare(
        &mu,
        &Poly::one(),
        &Poly::from_real(&[-1.0, 0.0, 1.0]),
        2,
        &lame_core::measure::circle_probes(c(0.0, 0.0), 2.0, 16),
        0.5,
    )
    .unwrap();
    assert!(rep.max_error < 1e-2);
}

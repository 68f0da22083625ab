#![allow(dead_code)]

use lame_core::operator::LameOperator;
use lame_core::poly::Poly;
use num_complex::Complex64;
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn complex(range: f64) -> impl Strategy<Value = Complex64> {
    (-range..range, -range..range).prop_map(|(re, im)| c(re, im))
}

pub fn poly(max_degree: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(complex(1.0), 2..=max_degree + 1).prop_map(|mut v| {
        let last = v.len() - 1;
        if v[last].norm() < 0.1 {
            v[last] = c(1.0, 0.0);
        }
        Poly::new(v)
    })
}

pub fn matched(a: &[Complex64], b: &[Complex64]) -> f64 {
    lame_core::poly::matched_distance(a, b)
}

pub fn k1_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap()
}

pub fn k2_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::from_real(&[0.0, -1.0, 0.0, 1.0])]).unwrap()
}

pub fn legendre_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, 2.0]), Poly::from_real(&[-1.0, 0.0, 1.0])]).unwrap()
}

pub fn quartic_roots() -> Vec<Complex64> {
    vec![c(0.0, 1.0), c(0.0, -1.0), c(2.0, 3.0), c(3.0, -2.0)]
}

pub fn quartic_operator() -> LameOperator {
    LameOperator::from_composition(3, &Poly::from_roots(&quartic_roots())).unwrap()
}

pub fn rel_coeff_diff(a: &Poly, b: &Poly) -> f64 {
    let d = a.degree().unwrap_or(0).max(b.degree().unwrap_or(0));
    (0..=d).map(|i| (a.coeff(i) - b.coeff(i)).norm()).fold(0.0, f64::max) / b.max_coeff_abs().max(1e-300)
}

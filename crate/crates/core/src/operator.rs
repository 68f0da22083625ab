//! Higher Lamé operators `T = Σ Q_i d^i/dz^i` and their action on polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Differential operator with polynomial coefficients `q[i]` multiplying the
/// `i`-th derivative. `q[0]` is an order-zero term and may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LameOperator {
    q: Vec<Poly>,
    fuchs_index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub r: i64,
    pub nondegenerate: bool,
    pub exactly_solvable: bool,
    pub issues: Vec<String>,
}

impl Classification {
    /// Non-degenerate higher Lamé operator.
    pub fn is_admissible(&self) -> bool {
        self.issues.is_empty()
    }
}

fn fuchs_index_of(q: &[Poly]) -> i64 {
    q.iter()
        .enumerate()
        .skip(1)
        .filter_map(|(i, p)| p.degree().map(|d| d as i64 - i as i64))
        .max()
        .unwrap_or(i64::MIN)
}

/// `n (n-1) ... (n-i+1)`
pub fn falling_factorial(n: usize, i: usize) -> f64 {
    (0..i).map(|t| n as f64 - t as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

impl LameOperator {
    /// Builds an operator from `Q_0..Q_k`. Rejects `k = 0`, a zero `Q_k`,
    /// and an order-zero term of degree above the Fuchs index.
    pub fn new(q: Vec<Poly>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::NotLame("operator order must be at least 1".into()));
        }
        if q.last().unwrap().is_zero() {
            return Err(Error::NotLame("leading coefficient Q_k is zero".into()));
        }
        let fuchs_index = fuchs_index_of(&q);
        if let Some(d0) = q[0].degree() {
            if fuchs_index >= 0 && d0 as i64 > fuchs_index {
                return Err(Error::NotLame(format!(
                    "order-zero term has degree {d0} above the Fuchs index {fuchs_index}"
                )));
            }
        }
        Ok(LameOperator { q, fuchs_index })
    }

    /// Operator `S -> d^k/dz^k (Q S)` expanded by the Leibniz rule.
    pub fn from_composition(k: usize, q: &Poly) -> Result<Self> {
        let degree = q.degree().ok_or(Error::ZeroPolynomial)?;
        if k == 0 {
            return Err(Error::NotLame("operator order must be at least 1".into()));
        }
        if degree < k {
            return Err(Error::DegreeTooSmall { degree, needed: k });
        }
        let coeffs = (0..=k)
            .map(|i| q.nth_derivative(k - i).scale(Complex64::new(binomial(k, i), 0.0)))
            .collect();
        Self::new(coeffs)
    }

    pub fn order(&self) -> usize {
        self.q.len() - 1
    }

    pub fn fuchs_index(&self) -> i64 {
        self.fuchs_index
    }

    pub fn coefficient(&self, i: usize) -> &Poly {
        &self.q[i]
    }

    pub fn coefficients(&self) -> &[Poly] {
        &self.q
    }

    pub fn leading_coefficient(&self) -> &Poly {
        self.q.last().unwrap()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.fuchs_index >= 0
            && self.leading_coefficient().degree() == Some(self.order() + self.fuchs_index as usize)
    }

    pub fn validate(&self) -> Classification {
        let r = self.fuchs_index;
        let k = self.order();
        let mut issues = Vec::new();
        if r < 0 {
            issues.push(format!("not a higher Lamé operator: Fuchs index {r} is negative"));
        }
        let nondegenerate = self.is_nondegenerate();
        if r >= 0 && !nondegenerate {
            issues.push(format!(
                "degenerate: deg Q_k = {} but k + r = {}",
                self.leading_coefficient().degree().unwrap_or(0),
                k as i64 + r
            ));
        }
        Classification {
            r,
            nondegenerate,
            exactly_solvable: r == 0,
            issues,
        }
    }

    /// Fuchs index of an admissible operator, or the reason it is not one.
    pub fn require_nondegenerate(&self) -> Result<usize> {
        if self.fuchs_index < 0 {
            return Err(Error::NotLame(format!("Fuchs index {} is negative", self.fuchs_index)));
        }
        if !self.is_nondegenerate() {
            return Err(Error::Degenerate {
                deg_qk: self.leading_coefficient().degree().unwrap_or(0),
                expected: self.order() + self.fuchs_index as usize,
            });
        }
        Ok(self.fuchs_index as usize)
    }

    /// `Σ Q_i s^{(i)}` including the order-zero term.
    pub fn apply(&self, s: &Poly) -> Poly {
        let mut out = Poly::zero();
        let mut deriv = s.clone();
        for (i, qi) in self.q.iter().enumerate() {
            if i > 0 {
                deriv = deriv.derivative();
            }
            if deriv.is_zero() {
                break;
            }
            if !qi.is_zero() {
                out = out.add(&qi.mul(&deriv));
            }
        }
        out
    }

    /// Same sum with absolute values of every coefficient, for backward-error scaling.
    pub fn apply_abs(&self, s: &Poly) -> Vec<f64> {
        let abs_s: Vec<f64> = s.coeffs().iter().map(|c| c.norm()).collect();
        let mut out = vec![0.0; abs_s.len() + self.fuchs_index.max(0) as usize + 1];
        for (i, qi) in self.q.iter().enumerate() {
            for (j, &sj) in abs_s.iter().enumerate().skip(i) {
                if sj == 0.0 {
                    continue;
                }
                let f = falling_factorial(j, i) * sj;
                for (l, c) in qi.coeffs().iter().enumerate() {
                    let idx = j - i + l;
                    if idx >= out.len() {
                        out.resize(idx + 1, 0.0);
                    }
                    out[idx] += c.norm() * f;
                }
            }
        }
        out
    }

    /// Coefficients of `T z^j`, dense up to degree `j + r`.
    pub fn image_of_monomial(&self, j: usize) -> Vec<Complex64> {
        let len = j + self.fuchs_index.max(0) as usize + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (i, qi) in self.q.iter().enumerate().take(j + 1) {
            let f = falling_factorial(j, i);
            for (l, c) in qi.coeffs().iter().enumerate() {
                let idx = j - i + l;
                if idx < len {
                    out[idx] += c * f;
                }
            }
        }
        out
    }

    /// Forced leading coefficient `a_r` of every Van Vleck polynomial paired
    /// with a Stieltjes polynomial of degree `n`.
    pub fn leading_balance(&self, n: usize) -> Result<Complex64> {
        let r = self.require_nondegenerate()?;
        let mut a = -self.q[0].coeff(r);
        for (i, qi) in self.q.iter().enumerate().skip(1) {
            a -= qi.coeff(i + r) * falling_factorial(n, i);
        }
        Ok(a)
    }

    /// Operator multiplied by a nonzero constant.
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        Self::new(self.q.iter().map(|p| p.scale(c)).collect())
    }

    /// Operator in the coordinate `w` with `z = center + scale * w`.
    pub fn pullback(&self, center: Complex64, scale: Complex64) -> Result<Self> {
        let q = self
            .q
            .iter()
            .enumerate()
            .map(|(i, p)| p.compose_affine(center, scale).scale(scale.powi(-(i as i32))))
            .collect();
        Self::new(q)
    }

    /// Value of each `Q_i` at `z`.
    pub fn eval_coefficients(&self, z: Complex64) -> Vec<Complex64> {
        self.q.iter().map(|p| p.eval(z)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<Poly>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    composition_of: Option<Poly>,
}

impl Serialize for LameOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson {
            k: self.order(),
            coeffs: Some(self.q.clone()),
            composition_of: None,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LameOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = OperatorJson::deserialize(deserializer)?;
        match (raw.coeffs, raw.composition_of) {
            (Some(mut coeffs), None) => {
                if coeffs.len() > raw.k + 1 {
                    return Err(D::Error::custom(format!(
                        "{} coefficients given for an operator of order {}",
                        coeffs.len(),
                        raw.k
                    )));
                }
                coeffs.resize(raw.k + 1, Poly::zero());
                LameOperator::new(coeffs).map_err(D::Error::custom)
            }
            (None, Some(q)) => LameOperator::from_composition(raw.k, &q).map_err(D::Error::custom),
            _ => Err(D::Error::custom("exactly one of `coeffs` or `composition_of` is required")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn legendre_op() -> LameOperator {
        LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, 2.0]), Poly::from_real(&[-1.0, 0.0, 1.0])])
            .unwrap()
    }

    fn quartic_q() -> Poly {
        Poly::from_roots(&[c(0.0, 1.0), c(0.0, -1.0), c(2.0, 3.0), c(3.0, -2.0)])
    }

    #[test]
    fn classification_examples() {
        let cls = legendre_op().validate();
        assert_eq!((cls.r, cls.nondegenerate, cls.exactly_solvable), (0, true, true));

        let k1 = LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap();
        let cls = k1.validate();
        assert_eq!((cls.r, cls.nondegenerate, cls.exactly_solvable), (1, true, false));

        let fig = LameOperator::from_composition(3, &quartic_q()).unwrap();
        let cls = fig.validate();
        assert_eq!((cls.r, cls.nondegenerate), (1, true));
        assert!(cls.is_admissible());
    }

    #[test]
    fn negative_and_degenerate_operators_are_flagged() {
        let neg = LameOperator::new(vec![Poly::zero(), Poly::one()]).unwrap();
        assert!(neg.validate().issues[0].contains("not a higher Lamé operator"));
        // Q_1 of degree 3 forces r = 2 but Q_2 has degree 3 < 4
        let degen = LameOperator::new(vec![
            Poly::zero(),
            Poly::monomial(3),
            Poly::from_real(&[0.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let cls = degen.validate();
        assert_eq!(cls.r, 2);
        assert!(!cls.nondegenerate);
        assert!(matches!(degen.leading_balance(5), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn order_zero_term_above_fuchs_index_is_rejected() {
        let res = LameOperator::new(vec![Poly::monomial(2), Poly::from_real(&[0.0, -1.0, 1.0])]);
        assert!(res.is_err());
    }

    #[test]
    fn apply_examples() {
        let op = LameOperator::new(vec![Poly::zero(), Poly::monomial(2)]).unwrap();
        let out = op.apply(&Poly::monomial(5));
        assert_eq!(out, Poly::monomial(6).scale(c(5.0, 0.0)));

        let p2 = Poly::from_real(&[-1.0, 0.0, 3.0]);
        assert_eq!(legendre_op().apply(&p2), p2.scale(c(6.0, 0.0)));

        let q0 = Poly::from_real(&[2.0, 1.0]);
        let op = LameOperator::new(vec![q0.clone(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap();
        assert_eq!(op.apply(&Poly::one()), q0);
    }

    #[test]
    fn composition_examples() {
        let op = LameOperator::from_composition(1, &Poly::monomial(1)).unwrap();
        assert_eq!(op.coefficient(1), &Poly::monomial(1));
        assert_eq!(op.coefficient(0), &Poly::one());

        let q = quartic_q();
        let op = LameOperator::from_composition(3, &q).unwrap();
        assert_eq!(op.coefficient(3), &q);
        assert_eq!(op.coefficient(2), &q.derivative().scale(c(3.0, 0.0)));
        assert_eq!(op.coefficient(1), &q.nth_derivative(2).scale(c(3.0, 0.0)));
        assert_eq!(op.coefficient(0), &q.nth_derivative(3));
        assert_eq!(op.fuchs_index(), 1);

        assert!(LameOperator::from_composition(3, &Poly::monomial(2)).is_err());
    }

    #[test]
    fn leading_balance_examples() {
        let k1 = LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap();
        assert_eq!(k1.leading_balance(7).unwrap(), c(-7.0, 0.0));
        let k2 = LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::from_real(&[0.0, -1.0, 0.0, 1.0])])
            .unwrap();
        assert_eq!(k2.leading_balance(6).unwrap(), c(-30.0, 0.0));
        let fig = LameOperator::from_composition(3, &quartic_q()).unwrap();
        for n in [3usize, 10, 39] {
            let want = -(((n + 2) * (n + 3) * (n + 4)) as f64);
            assert!((fig.leading_balance(n).unwrap() - c(want, 0.0)).norm() < 1e-9 * want.abs());
        }
    }

    #[test]
    fn image_of_monomial_matches_apply() {
        let fig = LameOperator::from_composition(3, &quartic_q()).unwrap();
        for j in [0usize, 2, 5] {
            let img = fig.image_of_monomial(j);
            let direct = fig.apply(&Poly::monomial(j));
            for (i, v) in img.iter().enumerate() {
                assert!((v - direct.coeff(i)).norm() < 1e-12 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn pullback_conjugates_operator() {
        let fig = LameOperator::from_composition(3, &quartic_q()).unwrap();
        let (center, scale) = (c(1.0, 0.5), c(2.0, -1.0));
        let pulled = fig.pullback(center, scale).unwrap();
        let s = Poly::new(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.3, 1.0), c(1.0, 0.0)]);
        // (T s)(center + scale w) = (T' s~)(w) with s~(w) = s(center + scale w)
        let lhs = fig.apply(&s).compose_affine(center, scale);
        let rhs = pulled.apply(&s.compose_affine(center, scale));
        for i in 0..=lhs.degree().unwrap() {
            assert!((lhs.coeff(i) - rhs.coeff(i)).norm() < 1e-10 * lhs.max_coeff_abs());
        }
    }

    #[test]
    fn json_forms() {
        let op: LameOperator = serde_json::from_str(
            r#"{"k": 2, "coeffs": [{"re": [], "im": []}, {"re": [0, 2], "im": [0, 0]}, {"re": [-1, 0, 1], "im": [0, 0, 0]}]}"#,
        )
        .unwrap();
        assert_eq!(op, legendre_op());
        let op: LameOperator =
            serde_json::from_str(r#"{"k": 1, "composition_of": {"re": [0, 1], "im": [0, 0]}}"#).unwrap();
        assert_eq!(op.coefficient(0), &Poly::one());
        let back: LameOperator = serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        assert_eq!(back, op);
        assert!(serde_json::from_str::<LameOperator>(r#"{"k": 1}"#).is_err());
    }
}

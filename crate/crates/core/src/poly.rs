//! Dense univariate polynomials over `Complex64`, simultaneous root finding
//! and a few planar geometry helpers on root sets.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Finite set of points in the complex plane (roots, hull vertices, samples).
pub type ComplexPointSet = Vec<Complex64>;

/// Coefficients are relative to the largest coefficient magnitude when a sum
/// cancels a leading term.
const CANCEL_TOL: f64 = 1e-14;

/// Polynomial with coefficients stored in ascending degree order.
///
/// The empty coefficient vector is the zero polynomial. The leading stored
/// coefficient is never zero.
#[derive(Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}{:+}i", c.re, c.im)?;
        }
        write!(f, "]")
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// `z^n`
    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[n] = Complex64::new(1.0, 0.0);
        Poly { coeffs }
    }

    /// Monic polynomial with the given roots (repeated for multiplicity).
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Poly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `z^i` (zero above the degree).
    pub fn coeff(&self, i: usize) -> Complex64 {
        self.coeffs.get(i).copied().unwrap_or_default()
    }

    pub fn leading(&self) -> Option<Complex64> {
        self.coeffs.last().copied()
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in a single Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum |a_i| |z|^i`, the natural scale for rounding errors of `eval(z)`.
    pub fn eval_abs_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, order: usize) -> Poly {
        if order >= self.coeffs.len() {
            return Poly::zero();
        }
        let coeffs = (order..self.coeffs.len())
            .map(|i| {
                let falling: f64 = ((i - order + 1)..=i).map(|f| f as f64).product();
                self.coeffs[i] * falling
            })
            .collect();
        Poly::new(coeffs)
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(len);
        let mut magnitude = Vec::with_capacity(len);
        for i in 0..len {
            let (a, b) = (self.coeff(i), other.coeff(i));
            out.push(a + b);
            magnitude.push(a.norm().max(b.norm()));
        }
        let scale = magnitude.iter().copied().fold(0.0, f64::max);
        // leading terms that cancelled to rounding level are dropped
        while let Some(last) = out.last() {
            let i = out.len() - 1;
            if last.norm() <= CANCEL_TOL * magnitude[i].max(CANCEL_TOL * scale) {
                out.pop();
            } else {
                break;
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Scales so that the leading coefficient is exactly one.
    pub fn monic(&self) -> Result<Poly> {
        let lead = self.leading().ok_or(Error::ZeroPolynomial)?;
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|&c| c / lead).collect();
        *coeffs.last_mut().unwrap() = Complex64::new(1.0, 0.0);
        Ok(Poly { coeffs })
    }

    /// Polynomial in `t` equal to `self(center + scale * t)`.
    pub fn compose_affine(&self, center: Complex64, scale: Complex64) -> Poly {
        let linear = Poly::new(vec![center, scale]);
        let mut out = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            out = out.mul(&linear).add(&Poly::constant(c));
        }
        out
    }

    /// All `deg` roots with multiplicity, by Aberth-Ehrlich iteration with a
    /// fixed seed for the initial circle.
    pub fn roots(&self) -> Result<ComplexPointSet> {
        self.roots_seeded(0x5eed)
    }

    pub fn roots_seeded(&self, seed: u64) -> Result<ComplexPointSet> {
        let degree = match self.degree() {
            None => return Err(Error::ZeroPolynomial),
            Some(0) => return Err(Error::DegreeTooSmall { degree: 0, needed: 1 }),
            Some(d) => d,
        };
        let zeros = self.coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
        if zeros > 0 {
            let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
            if degree > zeros {
                roots.extend(Poly::new(self.coeffs[zeros..].to_vec()).roots_seeded(seed)?);
            }
            return Ok(roots);
        }
        let lead = self.leading().unwrap();
        if degree == 1 {
            return Ok(vec![-self.coeffs[0] / lead]);
        }
        let init = circle_start(Complex64::new(0.0, 0.0), self.cauchy_bound(), degree, seed);
        let outcome = aberth(|z| self.eval_with_derivative(z), init, MAX_ABERTH_ITER);
        let mut roots = outcome.roots;
        for r in roots.iter_mut() {
            *r = newton_polish(self, *r);
        }
        let residual = roots
            .iter()
            .map(|&r| self.eval(r).norm() / self.eval_abs_scale(r).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if residual > ROOT_RESIDUAL_TOL || roots.iter().any(|r| !r.is_finite()) {
            return Err(Error::RootsNotConverged {
                iterations: outcome.iterations,
                residual,
                best: roots,
            });
        }
        Ok(roots)
    }

    /// Unique positive root of `|a_n| x^n - sum_{i<n} |a_i| x^i`; every root
    /// lies in the closed disk of this radius.
    pub fn cauchy_bound(&self) -> f64 {
        let Some(n) = self.degree() else { return 0.0 };
        if n == 0 {
            return 0.0;
        }
        let lead = self.coeffs[n].norm();
        let lower: Vec<f64> = self.coeffs[..n].iter().map(|c| c.norm() / lead).collect();
        if lower.iter().all(|&a| a == 0.0) {
            return 0.0;
        }
        // f(x) = 1 - sum a_i x^{i-n} is increasing on (0, inf); bisect on log x
        let f = |x: f64| {
            1.0 - lower
                .iter()
                .enumerate()
                .map(|(i, &a)| a * x.powi(-((n - i) as i32)))
                .sum::<f64>()
        };
        let mut hi = 1.0 + lower.iter().copied().fold(0.0, f64::max);
        let mut lo = hi / 2.0;
        while f(lo) > 0.0 && lo > f64::MIN_POSITIVE {
            hi = lo;
            lo /= 2.0;
        }
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }
}

const MAX_ABERTH_ITER: usize = 800;
const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Seeded, slightly perturbed circle of `count` points.
pub fn circle_start(center: Complex64, radius: f64, count: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..count)
        .map(|j| {
            let jitter: f64 = rng.gen_range(-0.1..0.1);
            let theta = phase + std::f64::consts::TAU * (j as f64 + jitter) / count as f64;
            let rad = radius * (1.0 + rng.gen_range(-0.02..0.02));
            center + Complex64::from_polar(rad, theta)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AberthOutcome {
    pub roots: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Aberth-Ehrlich simultaneous iteration for any function given through
/// `eval(z) = (p(z), p'(z))`. The number of roots sought is `init.len()`.
pub fn aberth<F>(eval: F, init: Vec<Complex64>, max_iter: usize) -> AberthOutcome
where
    F: Fn(Complex64) -> (Complex64, Complex64),
{
    let n = init.len();
    let mut z = init;
    let mut done = vec![false; n];
    for iter in 0..max_iter {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (p, dp) = eval(z[i]);
            if p == Complex64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == Complex64::new(0.0, 0.0) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let mut step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                step = if ratio.is_finite() { ratio } else { Complex64::new(1e-8, 1e-8) };
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            return AberthOutcome {
                roots: z,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    AberthOutcome {
        roots: z,
        iterations: max_iter,
        converged: false,
    }
}

fn newton_polish(p: &Poly, mut z: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (v, dv) = p.eval_with_derivative(z);
        if dv == Complex64::new(0.0, 0.0) {
            break;
        }
        let next = z - v / dv;
        if !next.is_finite() || p.eval(next).norm() >= v.norm() {
            break;
        }
        z = next;
    }
    z
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        Poly::add(self, rhs)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        Poly::sub(self, rhs)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        Poly::mul(self, rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyJson::deserialize(deserializer)?;
        if raw.re.len() != raw.im.len() {
            return Err(serde::de::Error::custom(format!(
                "polynomial has {} real parts but {} imaginary parts",
                raw.re.len(),
                raw.im.len()
            )));
        }
        Ok(Poly::new(
            raw.re
                .into_iter()
                .zip(raw.im)
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        ))
    }
}

/// Convex hull of a point set, vertices counterclockwise.
///
/// Degenerate hulls are kept: a single point or the two endpoints of a
/// segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<Complex64>,
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

impl ConvexHull {
    pub fn new(points: &[Complex64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut pts: Vec<Complex64> = points.to_vec();
        pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let scale = pts
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let tol = 1e-13 * scale;
        pts.dedup_by(|a, b| (*a - *b).norm() <= tol);
        if pts.len() <= 2 {
            return Ok(ConvexHull { vertices: pts });
        }
        // Andrew's monotone chain; collinear points are dropped
        let mut lower: Vec<Complex64> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2
                && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol * scale
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Complex64> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2
                && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol * scale
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() < 2 {
            // all points coincide up to tolerance
            lower.truncate(1);
        }
        Ok(ConvexHull { vertices: lower })
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn centroid(&self) -> Complex64 {
        let n = self.vertices.len() as f64;
        self.vertices.iter().sum::<Complex64>() / n
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Largest distance from the origin to a hull vertex.
    pub fn max_modulus(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.distance(z) == 0.0
    }

    /// Euclidean distance to the hull; zero inside or on the boundary.
    pub fn distance(&self, z: Complex64) -> f64 {
        let v = &self.vertices;
        match v.len() {
            1 => return (z - v[0]).norm(),
            2 => return segment_distance(z, v[0], v[1]),
            _ => {}
        }
        let inside = (0..v.len()).all(|i| cross(v[i], v[(i + 1) % v.len()], z) >= 0.0);
        if inside {
            return 0.0;
        }
        (0..v.len())
            .map(|i| segment_distance(z, v[i], v[(i + 1) % v.len()]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Convex hull of a point set.
pub fn convex_hull(points: &[Complex64]) -> Result<ConvexHull> {
    ConvexHull::new(points)
}

/// Distance from `z` to a hull.
pub fn dist_to_hull(z: Complex64, hull: &ConvexHull) -> f64 {
    hull.distance(z)
}

pub fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a) * ab.conj()).re / len2;
    let t = t.clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Largest distance between matched points after greedily pairing the
/// closest remaining points. Exact for well-separated sets, which is how it
/// is used (comparing root sets that agree up to small errors).
pub fn matched_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == a.len() {
            break;
        }
    }
    worst
}

//! Heine-Stieltjes pairs: polynomials `S` of degree `n` and `V` of degree at
//! most `r` with `T S + V S = 0`.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, eigenvector_seeded, ComplexMatrix, Lu};
use crate::operator::{falling_factorial, LameOperator};
use crate::poly::{aberth, circle_start, matched_distance, ConvexHull, Poly};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Residual above which a pair is not accepted.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
const LEADING_REJECT: f64 = 1e-8;
const ABERTH_ITER: usize = 200;
const ABERTH_ROUND: usize = 15;
const CLUSTER_RADIUS: f64 = 1e-6;
/// Seed of the randomized starts used by the unseeded entry points.
pub const DEFAULT_SEED: u64 = 0x5713;

/// One solution `(V, S)` of `T S + V S = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralPair {
    pub n: usize,
    /// Van Vleck polynomial; its leading coefficient is the leading balance.
    pub v: Poly,
    /// Monic Stieltjes polynomial of degree `n`.
    pub s: Poly,
    pub roots: Vec<Complex64>,
    pub residual: f64,
    pub normalized_v: Poly,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SpectralPair {
    fn new(op: &LameOperator, n: usize, s: Poly, v: Poly, roots: Vec<Complex64>) -> Self {
        let residual = pair_residual(op, &s, &v);
        let normalized_v = v.monic().unwrap_or_else(|_| v.clone());
        SpectralPair {
            n,
            v,
            s,
            roots,
            residual,
            normalized_v,
            notes: Vec::new(),
        }
    }

    /// Free constant term of `V`, used to order spectra.
    pub fn b(&self) -> Complex64 {
        self.v.coeff(0)
    }

    /// Roots of the normalized Van Vleck polynomial.
    pub fn van_vleck_roots(&self) -> Vec<Complex64> {
        match self.normalized_v.degree() {
            None | Some(0) => Vec::new(),
            Some(_) => self.normalized_v.roots().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub operator: LameOperator,
    pub n: usize,
    pub r: usize,
    pub expected_count: u64,
    pub found_count: usize,
    pub pairs: Vec<SpectralPair>,
    pub defect_notes: Vec<String>,
}

impl SpectrumReport {
    fn new(op: &LameOperator, n: usize, r: usize, mut pairs: Vec<SpectralPair>, defect_notes: Vec<String>) -> Self {
        pairs.sort_by(|a, b| cmp_complex(a.b(), b.b()));
        let expected_count = binomial_u64(n + r, n);
        let mut defect_notes = defect_notes;
        if pairs.len() as u64 != expected_count {
            defect_notes.push(format!(
                "found {} pairs, expected {} at n = {}",
                pairs.len(),
                expected_count,
                n
            ));
        }
        SpectrumReport {
            operator: op.clone(),
            n,
            r,
            expected_count,
            found_count: pairs.len(),
            pairs,
            defect_notes,
        }
    }

    /// One row per (pair, root).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,n,b_re,b_im,residual,root_re,root_im\n");
        for (idx, pair) in self.pairs.iter().enumerate() {
            let b = pair.b();
            if pair.roots.is_empty() {
                out.push_str(&format!("{idx},{},{:e},{:e},{:e},,\n", pair.n, b.re, b.im, pair.residual));
            }
            for z in &pair.roots {
                out.push_str(&format!(
                    "{idx},{},{:e},{:e},{:e},{:e},{:e}\n",
                    pair.n, b.re, b.im, pair.residual, z.re, z.im
                ));
            }
        }
        out
    }
}

fn cmp_complex(a: Complex64, b: Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, t| acc * (n - t) as u64 / (t + 1) as u64)
}

/// Coefficients of `T S + V S`.
pub fn residual_vector(op: &LameOperator, s: &Poly, v: &Poly) -> Vec<Complex64> {
    let n = s.degree().unwrap_or(0);
    let len = n + op.fuchs_index().max(0) as usize + 1;
    let len = len.max(n + v.degree().unwrap_or(0) + 1);
    let mut out = vec![ZERO; len];
    for (j, &sj) in s.coeffs().iter().enumerate() {
        if sj == ZERO {
            continue;
        }
        for (m, t) in op.image_of_monomial(j).iter().enumerate() {
            out[m] += t * sj;
        }
        for (l, &vl) in v.coeffs().iter().enumerate() {
            out[j + l] += vl * sj;
        }
    }
    out
}

/// `||T S + V S||_inf / || |T||S| + |V||S| ||_inf` over coefficients.
pub fn pair_residual(op: &LameOperator, s: &Poly, v: &Poly) -> f64 {
    let res = residual_vector(op, s, v);
    let mut scale = op.apply_abs(s);
    for (j, sj) in s.coeffs().iter().enumerate() {
        for (l, vl) in v.coeffs().iter().enumerate() {
            if j + l >= scale.len() {
                scale.resize(j + l + 1, 0.0);
            }
            scale[j + l] += sj.norm() * vl.norm();
        }
    }
    let num = res.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let den = scale.iter().cloned().fold(0.0, f64::max);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `e_0..e_m` of the values whose power sums are `p[1..=m]`.
fn elementary_from_power_sums(p: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut e = vec![ZERO; m + 1];
    e[0] = ONE;
    for i in 1..=m {
        let mut acc = ZERO;
        for t in 1..=i {
            let term = e[i - t] * p[t];
            if t % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[i] = acc / i as f64;
    }
    e
}

/// `S^{(i)}(w) / S(w)` for `i = 0..=order`, from the roots of `S`.
pub fn log_derivative_ratios(roots: &[Complex64], w: Complex64, order: usize) -> Vec<Complex64> {
    let mut p = vec![ZERO; order + 1];
    for &z in roots {
        let u = (w - z).inv();
        let mut ut = ONE;
        for pt in p.iter_mut().skip(1) {
            ut *= u;
            *pt += ut;
        }
    }
    let e = elementary_from_power_sums(&p, order);
    e.iter()
        .enumerate()
        .map(|(i, ei)| ei * falling_factorial(i, i))
        .collect()
}

/// Outcome of Newton's method on the root equations of a Stieltjes polynomial.
#[derive(Debug, Clone)]
pub struct RootRefinement {
    pub roots: Vec<Complex64>,
    /// Largest scaled equation residual.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct RootSystem {
    q: Vec<Poly>,
    dq: Vec<Poly>,
    k: usize,
}

impl RootSystem {
    fn new(op: &LameOperator) -> Self {
        let q = op.coefficients().to_vec();
        let dq = q.iter().map(|p| p.derivative()).collect();
        RootSystem { q, dq, k: op.order() }
    }

    /// Scaled equations `F_j = Σ_i Q_i(z_j) i! e_{i-1}(u_j) / D_j` and,
    /// optionally, their Jacobian with the same row scaling.
    fn eval(&self, z: &[Complex64], jacobian: bool) -> (Vec<Complex64>, Option<ComplexMatrix>) {
        let n = z.len();
        let k = self.k;
        let mut f = vec![ZERO; n];
        let mut jac = jacobian.then(|| ComplexMatrix::zeros(n, n));
        let mut u = vec![ZERO; n];
        for j in 0..n {
            let mut p = vec![ZERO; k];
            let mut abs_sum = 0.0;
            for l in 0..n {
                if l == j {
                    u[l] = ZERO;
                    continue;
                }
                let ul = (z[j] - z[l]).inv();
                u[l] = ul;
                abs_sum += ul.norm();
                let mut ut = ONE;
                for pt in p.iter_mut().skip(1) {
                    ut *= ul;
                    *pt += ut;
                }
            }
            let e = elementary_from_power_sums(&p, k - 1);
            let qz: Vec<Complex64> = self.q.iter().map(|qi| qi.eval(z[j])).collect();
            let mut fj = ZERO;
            let mut scale = 0.0;
            let mut abs_pow = 1.0;
            for i in 1..=k {
                let fact = falling_factorial(i, i);
                fj += qz[i] * fact * e[i - 1];
                let size = self.q[i].eval_abs_scale(Complex64::new(z[j].norm().max(1.0), 0.0));
                scale += size * fact * abs_pow / falling_factorial(i - 1, i - 1);
                abs_pow *= abs_sum;
            }
            let scale = if scale > 0.0 { scale } else { 1.0 };
            f[j] = fj / scale;
            if let Some(jac) = jac.as_mut() {
                let mut diag = ZERO;
                for i in 1..=k {
                    diag += self.dq[i].eval(z[j]) * falling_factorial(i, i) * e[i - 1];
                }
                let mut off_sum = ZERO;
                for l in 0..n {
                    if l == j {
                        continue;
                    }
                    let ul = u[l];
                    let mut dfdu = ZERO;
                    for i in 2..=k {
                        // d e_{i-1} / d u_l = Σ_t (-u_l)^t e_{i-2-t}
                        let mut de = ZERO;
                        let mut pw = ONE;
                        for t in 0..(i - 1) {
                            de += pw * e[i - 2 - t];
                            pw *= -ul;
                        }
                        dfdu += qz[i] * falling_factorial(i, i) * de;
                    }
                    let entry = dfdu * ul * ul;
                    jac[(j, l)] = entry / scale;
                    off_sum += entry;
                }
                jac[(j, j)] = (diag - off_sum) / scale;
            }
        }
        (f, jac)
    }

    /// `(l2 norm, max norm)` of the scaled equations.
    fn merit(&self, z: &[Complex64]) -> (f64, f64) {
        let (f, _) = self.eval(z, false);
        let l2 = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let max = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if l2.is_finite() {
            (l2, max)
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    }
}

const ROOT_TOL: f64 = 1e-14;
const ROOT_ACCEPT: f64 = 1e-10;

/// Damped Newton iteration on the Stieltjes root equations
/// `Σ_i Q_i(z_j) S^{(i)}(z_j) = 0`, which do not involve `V`.
pub fn refine_roots(op: &LameOperator, init: &[Complex64], max_iter: usize) -> RootRefinement {
    let system = RootSystem::new(op);
    let mut z = init.to_vec();
    let (mut merit, mut max_res) = system.merit(&z);
    let mut iterations = 0;
    let mut stalls = 0;
    let mut forced = 0;
    while iterations < max_iter && max_res > ROOT_TOL {
        iterations += 1;
        let (f, jac) = system.eval(&z, true);
        let rhs: Vec<Complex64> = f.iter().map(|v| -v).collect();
        let step = match Lu::factor(&jac.unwrap()) {
            Ok(lu) => lu.solve(&rhs),
            Err(_) => break,
        };
        if step.iter().any(|s| !s.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut trial_best = None;
        while t >= 1.0 / 1024.0 {
            let trial: Vec<Complex64> = z.iter().zip(&step).map(|(a, d)| a + d * t).collect();
            let (l2, max) = system.merit(&trial);
            if l2 < merit {
                trial_best = Some((trial, l2, max));
                break;
            }
            if t < 1.0 / 512.0 && l2.is_finite() {
                trial_best = Some((trial, l2, max));
            }
            t *= 0.5;
        }
        let Some((trial, l2, max)) = trial_best else { break };
        if l2 >= merit {
            // accept a short non-monotone step to escape a plateau
            forced += 1;
            if forced > 10 || merit < ROOT_ACCEPT {
                break;
            }
        }
        let gain = l2 / merit;
        stalls = if gain > 0.5 && max < ROOT_ACCEPT { stalls + 1 } else { 0 };
        z = trial;
        merit = l2;
        max_res = max;
        if stalls >= 3 {
            break;
        }
    }
    RootRefinement {
        roots: z,
        residual: max_res,
        iterations,
        converged: max_res <= ROOT_ACCEPT,
    }
}

/// Result of Newton's method on the coefficient equations.
#[derive(Debug, Clone)]
pub struct CoefficientRefinement {
    pub s: Poly,
    pub v: Poly,
    pub residual: f64,
    pub iterations: usize,
    pub singular: bool,
}

/// Newton iteration on coefficients `0..n+r-1` of `T S + V S` in the unknowns
/// `s_0..s_{n-1}, v_0..v_{r-1}`, keeping `S` monic and the leading
/// coefficient of `V` fixed. Returns the best iterate.
pub fn refine_coefficients(
    op: &LameOperator,
    s: &Poly,
    v: &Poly,
    max_iter: usize,
) -> Result<CoefficientRefinement> {
    let r = op.require_nondegenerate()?;
    let n = s.degree().ok_or(Error::ZeroPolynomial)?;
    let s = s.monic()?;
    let a = op.leading_balance(n)?;
    let mut sc: Vec<Complex64> = (0..=n).map(|i| s.coeff(i)).collect();
    let mut vc: Vec<Complex64> = (0..=r).map(|i| v.coeff(i)).collect();
    vc[r] = a;
    let size = n + r;
    let build = |sc: &[Complex64], vc: &[Complex64]| (Poly::new(sc.to_vec()), Poly::new(vc.to_vec()));
    let (s0, v0) = build(&sc, &vc);
    let mut best = pair_residual(op, &s0, &v0);
    let mut iterations = 0;
    let mut singular = false;
    if size == 0 {
        return Ok(CoefficientRefinement {
            s: s0,
            v: v0,
            residual: best,
            iterations,
            singular,
        });
    }
    let images: Vec<Vec<Complex64>> = (0..n).map(|j| op.image_of_monomial(j)).collect();
    while iterations < max_iter && best > 1e-15 {
        iterations += 1;
        let (sp, vp) = build(&sc, &vc);
        let f = residual_vector(op, &sp, &vp);
        let mut jac = ComplexMatrix::zeros(size, size);
        for (j, img) in images.iter().enumerate() {
            for (m, t) in img.iter().enumerate().take(size) {
                jac[(m, j)] += *t;
            }
            for (l, vl) in vc.iter().enumerate() {
                if j + l < size {
                    jac[(j + l, j)] += *vl;
                }
            }
        }
        for l in 0..r {
            for (j, sj) in sc.iter().enumerate() {
                if j + l < size {
                    jac[(j + l, n + l)] = *sj;
                }
            }
        }
        let mut col_scale = vec![1.0; size];
        for (j, cs) in col_scale.iter_mut().enumerate() {
            let norm = (0..size).map(|m| jac[(m, j)].norm()).fold(0.0, f64::max);
            if norm > 0.0 {
                *cs = norm;
                for m in 0..size {
                    jac[(m, j)] /= norm;
                }
            }
        }
        let rhs: Vec<Complex64> = f.iter().take(size).map(|x| -x).collect();
        let step = match Lu::factor(&jac) {
            Ok(lu) => lu.solve(&rhs),
            Err(_) => {
                singular = true;
                break;
            }
        };
        let mut improved = false;
        let mut t = 1.0;
        for _ in 0..5 {
            let mut s_try = sc.clone();
            let mut v_try = vc.clone();
            for j in 0..n {
                s_try[j] += step[j] / col_scale[j] * t;
            }
            for l in 0..r {
                v_try[l] += step[n + l] / col_scale[n + l] * t;
            }
            let (sp, vp) = build(&s_try, &v_try);
            let res = pair_residual(op, &sp, &vp);
            if res < best {
                best = res;
                sc = s_try;
                vc = v_try;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (s, v) = build(&sc, &vc);
    Ok(CoefficientRefinement {
        s,
        v,
        residual: best,
        iterations,
        singular,
    })
}

/// Pushes a pair to full residual accuracy by coefficient-space Newton.
pub fn newton_refine(op: &LameOperator, pair: &SpectralPair) -> Result<SpectralPair> {
    let refined = refine_coefficients(op, &pair.s, &pair.v, 12)?;
    let mut out = pair.clone();
    if refined.residual < pair.residual {
        out.s = refined.s;
        out.v = refined.v;
        out.residual = refined.residual;
        out.normalized_v = out.v.monic().unwrap_or_else(|_| out.v.clone());
    }
    if refined.singular {
        out.notes.push(
            "Jacobian numerically singular: defective or multiple spectral point".to_string(),
        );
    }
    Ok(out)
}

/// Van Vleck polynomial determined by the roots of `S`: `V = -T S / S`,
/// sampled on a circle around the roots and fitted by a discrete Fourier
/// transform. The leading coefficient is set to `leading`.
pub fn van_vleck_from_roots(op: &LameOperator, roots: &[Complex64], r: usize, leading: Complex64) -> Poly {
    let k = op.order();
    let center = if roots.is_empty() {
        ZERO
    } else {
        roots.iter().sum::<Complex64>() / roots.len() as f64
    };
    let radius = roots.iter().map(|z| (z - center).norm()).fold(0.0, f64::max) + 1.0;
    let count = (4 * (r + 1)).max(8);
    let values: Vec<Complex64> = (0..count)
        .map(|p| {
            let w = center + Complex64::from_polar(radius, std::f64::consts::TAU * p as f64 / count as f64);
            let ratios = log_derivative_ratios(roots, w, k);
            -(0..=k).map(|i| op.coefficient(i).eval(w) * ratios[i]).sum::<Complex64>()
        })
        .collect();
    // coefficients in the variable (z - center) / radius
    let shifted: Vec<Complex64> = (0..=r)
        .map(|t| {
            values
                .iter()
                .enumerate()
                .map(|(p, val)| {
                    val * Complex64::from_polar(1.0, -std::f64::consts::TAU * (p * t) as f64 / count as f64)
                })
                .sum::<Complex64>()
                / count as f64
        })
        .collect();
    let mut v = Poly::zero();
    let unit = Poly::new(vec![-center / radius, Complex64::new(1.0 / radius, 0.0)]);
    let mut power = Poly::one();
    for c in shifted {
        v = v.add(&power.scale(c));
        power = power.mul(&unit);
    }
    let mut coeffs: Vec<Complex64> = (0..=r).map(|i| v.coeff(i)).collect();
    coeffs[r] = leading;
    Poly::new(coeffs)
}

fn circle_around_leading_roots(op: &LameOperator) -> Result<(Complex64, f64)> {
    let lead = op.leading_coefficient();
    let roots = match lead.degree() {
        Some(d) if d > 0 => lead.roots()?,
        _ => vec![ZERO],
    };
    let center = roots.iter().sum::<Complex64>() / roots.len() as f64;
    let spread = roots.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    Ok((center, if spread > 0.0 { 1.2 * spread } else { 1.0 }))
}

/// The exactly solvable case `r = 0`: `T` is triangular on monomials, so
/// `V = -λ_n` and `S` follows by back-substitution.
pub fn solve_exact(op: &LameOperator, n: usize) -> Result<SpectralPair> {
    solve_exact_seeded(op, n, DEFAULT_SEED)
}

/// [`solve_exact`] with an explicit seed for the randomized starts.
pub fn solve_exact_seeded(op: &LameOperator, n: usize, seed: u64) -> Result<SpectralPair> {
    let r = op.require_nondegenerate()?;
    if r != 0 {
        return Err(Error::WrongFuchsIndex {
            expected: 0,
            found: r as i64,
        });
    }
    let lambda = |m: usize| -> Complex64 {
        op.coefficients()
            .iter()
            .enumerate()
            .map(|(i, q)| q.coeff(i) * falling_factorial(m, i))
            .sum()
    };
    let ln = lambda(n);
    let mut s = vec![ZERO; n + 1];
    s[n] = ONE;
    let images: Vec<Vec<Complex64>> = (0..=n).map(|j| op.image_of_monomial(j)).collect();
    for m in (0..n).rev() {
        let lm = lambda(m);
        if (lm - ln).norm() <= 1e-10 * ln.norm().max(1.0) {
            return Err(Error::Resonant { n, m });
        }
        let acc: Complex64 = ((m + 1)..=n).map(|j| images[j][m] * s[j]).sum();
        s[m] = -acc / (lm - ln);
    }
    let s = Poly::new(s);
    let v = Poly::constant(-ln);
    let mut notes = Vec::new();
    let roots = if n == 0 {
        Vec::new()
    } else {
        match exact_roots(op, n, -ln, seed) {
            Some(roots) => roots,
            None => match s.roots() {
                Ok(roots) => roots,
                Err(Error::RootsNotConverged { best, residual, .. }) => {
                    notes.push(format!("roots of S not fully converged (residual {residual:.2e})"));
                    best
                }
                Err(e) => return Err(e),
            },
        }
    };
    let mut pair = SpectralPair::new(op, n, s, v, roots);
    pair.notes = notes;
    newton_refine(op, &pair)
}

/// Simple roots of the degree-`n` eigenpolynomial of `T` with eigenvalue `-b`.
fn exact_roots(op: &LameOperator, n: usize, b: Complex64, seed: u64) -> Option<Vec<Complex64>> {
    let problem = BasisProblem::new(op, n, ZERO).ok()?;
    let eig = eigenvector_seeded(&problem.matrix, b, seed).ok()?;
    let (_, refined, _) = problem.roots(op, &eig.vector, seed, 0, |_| true);
    refined.converged.then_some(refined.roots)
}

/// Orthonormal polynomial basis on a discrete point set, built by the Arnoldi
/// (Stieltjes) process with derivative values carried along.
struct ArnoldiBasis {
    points: Vec<Complex64>,
    /// `h[j][i]` for `i <= j + 1`: recurrence coefficients of `z q_j`.
    h: Vec<Vec<Complex64>>,
    /// `values[d][j][p]` = `q_j^{(d)}(points[p])`
    values: Vec<Vec<Vec<Complex64>>>,
    q0: Complex64,
}

impl ArnoldiBasis {
    fn new(points: Vec<Complex64>, degree: usize, max_derivative: usize) -> Result<Self> {
        let m = points.len();
        if m <= degree + 1 {
            return Err(Error::TooFewPoints {
                needed: degree + 2,
                got: m,
            });
        }
        let q0 = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
        let mut values = vec![Vec::with_capacity(degree + 1); max_derivative + 1];
        values[0].push(vec![q0; m]);
        for vd in values.iter_mut().skip(1) {
            vd.push(vec![ZERO; m]);
        }
        let mut h = Vec::with_capacity(degree);
        for j in 0..degree {
            let mut w: Vec<Vec<Complex64>> = (0..=max_derivative)
                .map(|d| {
                    (0..m)
                        .map(|p| {
                            let mut x = points[p] * values[d][j][p];
                            if d > 0 {
                                x += values[d - 1][j][p] * d as f64;
                            }
                            x
                        })
                        .collect()
                })
                .collect();
            let mut col = vec![ZERO; j + 2];
            for _pass in 0..2 {
                for i in 0..=j {
                    let coef: Complex64 = values[0][i].iter().zip(&w[0]).map(|(a, b)| a.conj() * b).sum();
                    col[i] += coef;
                    for d in 0..=max_derivative {
                        for p in 0..m {
                            let x = values[d][i][p];
                            w[d][p] -= coef * x;
                        }
                    }
                }
            }
            let norm = w[0].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm <= 1e-13 * (j as f64 + 1.0) {
                return Err(Error::TooFewPoints {
                    needed: degree + 2,
                    got: m,
                });
            }
            col[j + 1] = Complex64::new(norm, 0.0);
            for (d, wd) in w.into_iter().enumerate() {
                values[d].push(wd.into_iter().map(|x| x / norm).collect());
            }
            h.push(col);
        }
        Ok(ArnoldiBasis { points, h, values, q0 })
    }

    fn degree(&self) -> usize {
        self.h.len()
    }

    /// `(Σ c_j q_j(z), Σ c_j q_j'(z))` by the recurrence.
    fn eval_series(&self, c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
        let n = self.degree();
        let mut q = Vec::with_capacity(n + 1);
        let mut dq = Vec::with_capacity(n + 1);
        q.push(self.q0);
        dq.push(ZERO);
        for j in 0..n {
            let col = &self.h[j];
            let mut t = z * q[j];
            let mut dt = q[j] + z * dq[j];
            for i in 0..=j {
                t -= col[i] * q[i];
                dt -= col[i] * dq[i];
            }
            q.push(t / col[j + 1]);
            dq.push(dt / col[j + 1]);
        }
        let s = c.iter().zip(&q).map(|(a, b)| a * b).sum();
        let ds = c.iter().zip(&dq).map(|(a, b)| a * b).sum();
        (s, ds)
    }
}

/// Sample points filling the hull of `hull` widened by a margin, plus points
/// along the hull edges; at least `min_count` in total.
fn sample_points(hull: &ConvexHull, min_count: usize) -> Vec<Complex64> {
    let verts = hull.vertices();
    let diameter = hull.diameter();
    let margin = if diameter > 0.0 { 0.1 * diameter } else { 1.0 };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for v in verts {
        x0 = x0.min(v.re);
        x1 = x1.max(v.re);
        y0 = y0.min(v.im);
        y1 = y1.max(v.im);
    }
    let (x0, x1, y0, y1) = (x0 - margin, x1 + margin, y0 - margin, y1 + margin);
    let mut h = ((x1 - x0) * (y1 - y0) / min_count as f64).sqrt();
    loop {
        let mut pts = Vec::new();
        let nx = ((x1 - x0) / h).ceil() as usize;
        let ny = ((y1 - y0) / h).ceil() as usize;
        for a in 0..=nx {
            for b in 0..=ny {
                let z = Complex64::new(x0 + (a as f64 + 0.5) * h, y0 + (b as f64 + 0.5) * h);
                if hull.distance(z) <= margin {
                    pts.push(z);
                }
            }
        }
        for (i, &a) in verts.iter().enumerate() {
            let b = verts[(i + 1) % verts.len()];
            let steps = ((b - a).norm() / h).ceil() as usize;
            for t in 0..steps {
                pts.push(a + (b - a) * (t as f64 / steps as f64));
            }
        }
        if verts.len() == 1 {
            pts.push(verts[0]);
        }
        if pts.len() >= min_count {
            return pts;
        }
        h *= 0.8;
    }
}

/// Polynomials of degree `<= n` in a basis orthonormal on the hull of the
/// roots of `Q_k`, with the matrix of `-(T + a z)`.
struct BasisProblem {
    basis: ArnoldiBasis,
    matrix: ComplexMatrix,
    center: Complex64,
    start_radius: f64,
}

impl BasisProblem {
    fn new(op: &LameOperator, n: usize, a: Complex64) -> Result<Self> {
        let k = op.order();
        let lead_roots = op.leading_coefficient().roots()?;
        let hull = ConvexHull::new(&lead_roots)?;
        let points = sample_points(&hull, 6 * (n + 1) + 40);
        let basis = ArnoldiBasis::new(points, n, k)?;
        let m = basis.points.len();
        let qvals: Vec<Vec<Complex64>> = op
            .coefficients()
            .iter()
            .map(|q| basis.points.iter().map(|&z| q.eval(z)).collect())
            .collect();
        let mut matrix = ComplexMatrix::zeros(n + 1, n + 1);
        for j in 0..=n {
            let image: Vec<Complex64> = (0..m)
                .map(|p| {
                    let mut acc = a * basis.points[p] * basis.values[0][j][p];
                    for (i, qi) in qvals.iter().enumerate() {
                        acc += qi[p] * basis.values[i][j][p];
                    }
                    -acc
                })
                .collect();
            for i in 0..=n {
                matrix[(i, j)] = basis.values[0][i].iter().zip(&image).map(|(x, y)| x.conj() * y).sum();
            }
        }
        let (center, radius) = circle_around_leading_roots(op)?;
        Ok(BasisProblem {
            basis,
            matrix,
            center,
            start_radius: radius + 0.1 * hull.diameter().max(1.0),
        })
    }

    /// Roots of `Σ c_j q_j`: Aberth on the basis recurrence in short rounds,
    /// each followed by Newton on the root equations, until `accept` holds.
    fn roots<F>(&self, op: &LameOperator, c: &[Complex64], base: u64, seed: u64, accept: F) -> (Vec<Complex64>, RootRefinement, bool)
    where
        F: Fn(&[Complex64]) -> bool,
    {
        let n = self.basis.degree();
        let mut z = circle_start(self.center, self.start_radius, n, base ^ seed.wrapping_mul(0x9e37_79b9));
        let mut used = 0;
        let mut refined = None;
        while used < ABERTH_ITER {
            let round = if used == 0 { ABERTH_ROUND } else { 2 * ABERTH_ROUND };
            let outcome = aberth(|x| self.basis.eval_series(c, x), z, round);
            used += round;
            z = outcome.roots;
            let attempt = refine_roots(op, &z, 40);
            let ok = attempt.converged && accept(&attempt.roots);
            refined = Some(attempt);
            if ok || outcome.converged {
                break;
            }
        }
        let refined = refined.expect("at least one round");
        let matched = refined.converged && accept(&refined.roots);
        (z, refined, matched)
    }
}

/// The case `r = 1`. With `V = a z + b` and `a` forced by the leading
/// balance, `T + a z` maps polynomials of degree `<= n` into themselves and
/// the constants `b` are the eigenvalues of `-(T + a z)` on that space.
pub fn solve_r1(op: &LameOperator, n: usize) -> Result<SpectrumReport> {
    solve_r1_seeded(op, n, DEFAULT_SEED)
}

/// [`solve_r1`] with an explicit seed for the randomized starts.
pub fn solve_r1_seeded(op: &LameOperator, n: usize, seed: u64) -> Result<SpectrumReport> {
    let r = op.require_nondegenerate()?;
    if r != 1 {
        return Err(Error::WrongFuchsIndex {
            expected: 1,
            found: r as i64,
        });
    }
    let k = op.order();
    if n < k {
        return Err(Error::DegreeBelowOrder { n, k });
    }
    let a = op.leading_balance(n)?;
    let problem = BasisProblem::new(op, n, a)?;
    let matrix = &problem.matrix;

    let mut notes = Vec::new();
    let spectrum = match eigenvalues(matrix) {
        Ok(e) => e,
        Err(Error::QrNotConverged { iterations, partial }) => {
            notes.push(format!(
                "eigenvalue iteration stopped after {iterations} steps with {} of {} eigenvalues",
                partial.len(),
                n + 1
            ));
            partial
        }
        Err(e) => return Err(e),
    };
    let scale = matrix.norm_inf().max(f64::MIN_POSITIVE);
    for (i, x) in spectrum.iter().enumerate() {
        let cluster = spectrum
            .iter()
            .enumerate()
            .filter(|(j, y)| *j != i && (*x - **y).norm() <= CLUSTER_RADIUS * scale)
            .count();
        if cluster > 0 && spectrum[..i].iter().all(|y| (x - y).norm() > CLUSTER_RADIUS * scale) {
            notes.push(format!(
                "eigenvalue cluster of size {} near b = {:.6e}{:+.6e}i",
                cluster + 1,
                x.re,
                x.im
            ));
        }
    }

    let mut pairs: Vec<SpectralPair> = Vec::new();
    for (idx, &b) in spectrum.iter().enumerate() {
        let eig = match eigenvector_seeded(matrix, b, seed.wrapping_add(idx as u64)) {
            Ok(pair) => pair,
            Err(e) => {
                notes.push(format!("b = {:.6e}{:+.6e}i: {e}", b.re, b.im));
                continue;
            }
        };
        match candidate_pair(op, &problem, &spectrum, &eig.vector, b, a, n, seed, idx as u64) {
            Ok(pair) if pair.residual <= ACCEPT_RESIDUAL => {
                if let Some(dup) = pairs.iter().find(|p| {
                    (p.b() - pair.b()).norm() <= CLUSTER_RADIUS * scale.max(pair.b().norm())
                        && matched_distance(&p.roots, &pair.roots) < 1e-6
                }) {
                    notes.push(format!(
                        "b = {:.6e}{:+.6e}i duplicates an accepted pair",
                        dup.b().re,
                        dup.b().im
                    ));
                    continue;
                }
                pairs.push(pair);
            }
            Ok(pair) => notes.push(format!(
                "b = {:.6e}{:+.6e}i rejected: residual {:.2e}",
                b.re, b.im, pair.residual
            )),
            Err(reason) => notes.push(format!("b = {:.6e}{:+.6e}i rejected: {reason}", b.re, b.im)),
        }
    }
    Ok(SpectrumReport::new(op, n, r, pairs, notes))
}

#[allow(clippy::too_many_arguments)]
fn candidate_pair(
    op: &LameOperator,
    problem: &BasisProblem,
    spectrum: &[Complex64],
    c: &[Complex64],
    b: Complex64,
    a: Complex64,
    n: usize,
    base: u64,
    seed: u64,
) -> std::result::Result<SpectralPair, String> {
    // the root equations have one solution per pair; keep the one whose
    // constant term is closest to this eigenvalue
    let nearest_is_b = |roots: &[Complex64]| {
        let fitted = van_vleck_from_roots(op, roots, 1, a).coeff(0);
        let own = (fitted - b).norm();
        spectrum.iter().all(|x| (fitted - x).norm() >= own)
    };
    let (aberth_roots, refined, matched) = problem.roots(op, c, base, seed, nearest_is_b);
    let mut notes = Vec::new();
    let (s, v, roots) = if refined.converged {
        let v = van_vleck_from_roots(op, &refined.roots, 1, a);
        if !matched {
            notes.push(format!(
                "seeded by ill-conditioned eigenvalue {:.6e}{:+.6e}i",
                b.re, b.im
            ));
        }
        (Poly::from_roots(&refined.roots), v, refined.roots)
    } else {
        let s = monomial_eigenvector(op, n, a, b, base.wrapping_add(seed))?;
        notes.push("roots not separable; S recovered from monomial coefficients".to_string());
        (s, Poly::new(vec![b, a]), Vec::new())
    };
    let mut pair = SpectralPair::new(op, n, s, v, roots);
    pair.notes = notes;
    let mut pair = newton_refine(op, &pair).map_err(|e| e.to_string())?;
    if pair.roots.is_empty() {
        pair.roots = match pair.s.roots() {
            Ok(r) => r,
            Err(Error::RootsNotConverged { best, .. }) => best,
            Err(_) => aberth_roots,
        };
    }
    Ok(pair)
}

/// Monic eigenpolynomial of `-(T + a z)` for eigenvalue `b`, by inverse
/// iteration on the monomial coefficients.
fn monomial_eigenvector(
    op: &LameOperator,
    n: usize,
    a: Complex64,
    b: Complex64,
    seed: u64,
) -> std::result::Result<Poly, String> {
    let mut matrix = ComplexMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        for (m, t) in op.image_of_monomial(j).iter().enumerate().take(n + 1) {
            matrix[(m, j)] = -t;
        }
        if j < n {
            matrix[(j + 1, j)] -= a;
        }
    }
    let eig = eigenvector_seeded(&matrix, b, seed).map_err(|e| e.to_string())?;
    let s = eig.vector;
    let smax = s.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if s[n].norm() < LEADING_REJECT * smax {
        return Err("eigenvector has degree below n".to_string());
    }
    Poly::new(s).monic().map_err(|e| e.to_string())
}

/// Every pair for degree `n`: a single pair when `r = 0`, `n + 1` pairs when `r = 1`.
pub fn enumerate(op: &LameOperator, n: usize) -> Result<SpectrumReport> {
    enumerate_seeded(op, n, DEFAULT_SEED)
}

/// [`enumerate`] with an explicit seed for the randomized starts.
pub fn enumerate_seeded(op: &LameOperator, n: usize, seed: u64) -> Result<SpectrumReport> {
    let r = op.require_nondegenerate()?;
    match r {
        0 => {
            let pair = solve_exact_seeded(op, n, seed)?;
            let mut notes = Vec::new();
            if pair.residual > ACCEPT_RESIDUAL {
                notes.push(format!("pair residual {:.2e} above acceptance", pair.residual));
            }
            Ok(SpectrumReport::new(op, n, 0, vec![pair], notes))
        }
        1 => solve_r1_seeded(op, n, seed),
        _ => Err(Error::EnumerationUnsupported { r: r as i64 }),
    }
}

/// For each degree, the pair whose normalized Van Vleck polynomial has roots
/// closest to those of `target`.
pub fn select_sequence(op: &LameOperator, target: &Poly, n_list: &[usize]) -> Result<Vec<SpectralPair>> {
    select_sequence_seeded(op, target, n_list, DEFAULT_SEED)
}

/// [`select_sequence`] with an explicit seed for the randomized starts.
pub fn select_sequence_seeded(
    op: &LameOperator,
    target: &Poly,
    n_list: &[usize],
    seed: u64,
) -> Result<Vec<SpectralPair>> {
    let target_roots = match target.degree() {
        None | Some(0) => Vec::new(),
        Some(_) => target.roots()?,
    };
    n_list
        .iter()
        .map(|&n| {
            let report = enumerate_seeded(op, n, seed)?;
            report
                .pairs
                .into_iter()
                .map(|p| {
                    let d = matched_distance(&p.van_vleck_roots(), &target_roots);
                    (d, p)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(_, p)| p)
                .ok_or(Error::EmptySpectrum { n })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn k1_op() -> LameOperator {
        LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap()
    }

    fn k2_op() -> LameOperator {
        LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::from_real(&[0.0, -1.0, 0.0, 1.0])]).unwrap()
    }

    fn legendre_op() -> LameOperator {
        LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, 2.0]), Poly::from_real(&[-1.0, 0.0, 1.0])])
            .unwrap()
    }

    fn poly_err(a: &Poly, b: &Poly) -> f64 {
        let d = a.degree().unwrap_or(0).max(b.degree().unwrap_or(0));
        (0..=d).map(|i| (a.coeff(i) - b.coeff(i)).norm()).fold(0.0, f64::max) / b.max_coeff_abs().max(1.0)
    }

    #[test]
    fn exact_monomial_eigenfunction() {
        let op = LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::monomial(2)]).unwrap();
        let pair = solve_exact(&op, 3).unwrap();
        assert_eq!(pair.v, Poly::constant(c(-6.0, 0.0)));
        assert_eq!(pair.s, Poly::monomial(3));
        assert!(pair.residual < 1e-15);
    }

    #[test]
    fn exact_legendre_four() {
        let pair = solve_exact(&legendre_op(), 4).unwrap();
        assert_eq!(pair.v, Poly::constant(c(-20.0, 0.0)));
        // Gauss-Legendre nodes of degree 4
        let a = ((3.0 - 2.0 * (6.0f64 / 5.0).sqrt()) / 7.0).sqrt();
        let b = ((3.0 + 2.0 * (6.0f64 / 5.0).sqrt()) / 7.0).sqrt();
        let nodes = [c(-b, 0.0), c(-a, 0.0), c(a, 0.0), c(b, 0.0)];
        assert!(matched_distance(&pair.roots, &nodes) < 1e-10);
    }

    #[test]
    fn exact_resonance_is_reported() {
        // λ_m = m(m-1) - 2 vanishes at m = 2 and at m = -1; λ_1 = λ_0
        let op = LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::monomial(2)]).unwrap();
        assert!(matches!(solve_exact(&op, 1), Err(Error::Resonant { n: 1, m: 0 })));
    }

    #[test]
    fn r1_closed_form_k1() {
        let report = solve_r1(&k1_op(), 3).unwrap();
        assert_eq!(report.found_count, 4);
        for (m, pair) in report.pairs.iter().enumerate() {
            assert!((pair.b() - c(m as f64, 0.0)).norm() < 1e-10);
            assert!((pair.v.coeff(1) - c(-3.0, 0.0)).norm() < 1e-12);
            let mut want = Poly::one();
            for _ in 0..m {
                want = want.mul(&Poly::monomial(1));
            }
            for _ in m..3 {
                want = want.mul(&Poly::from_real(&[-1.0, 1.0]));
            }
            assert!(poly_err(&pair.s, &want) < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn r1_closed_form_k2() {
        let report = solve_r1(&k2_op(), 2).unwrap();
        assert_eq!(report.found_count, 3);
        let want = [
            (c(-2.0, 0.0), Poly::from_real(&[0.0, -1.0, 1.0])),
            (c(0.0, 0.0), Poly::from_real(&[-1.0, 0.0, 1.0])),
            (c(2.0, 0.0), Poly::from_real(&[0.0, 1.0, 1.0])),
        ];
        for (pair, (b, s)) in report.pairs.iter().zip(&want) {
            assert!((pair.b() - b).norm() < 1e-10);
            assert!(poly_err(&pair.s, s) < 1e-10);
        }
    }

    #[test]
    fn refine_fixed_point_and_basin() {
        let op = k2_op();
        let s = Poly::from_real(&[-1.0, 0.0, 1.0]);
        let v = Poly::from_real(&[0.0, -2.0]);
        let pair = SpectralPair::new(&op, 2, s.clone(), v.clone(), vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let refined = newton_refine(&op, &pair).unwrap();
        assert!(poly_err(&refined.s, &s) < 1e-14);
        let noisy_s = Poly::new(vec![c(-1.0 + 1e-4, -1e-4), c(1e-4, 0.0), ONE]);
        let noisy_v = Poly::new(vec![c(1e-4, 1e-4), c(-2.0, 0.0)]);
        let pair = SpectralPair::new(&op, 2, noisy_s, noisy_v, Vec::new());
        let refined = newton_refine(&op, &pair).unwrap();
        assert!(poly_err(&refined.s, &s) < 1e-12);
        assert!(refined.residual < 1e-12);
    }

    #[test]
    fn enumerate_rejects_r2() {
        let op = LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0])])
            .unwrap();
        assert!(matches!(enumerate(&op, 4), Err(Error::EnumerationUnsupported { r: 2 })));
    }

    #[test]
    fn select_sequence_exact_hits() {
        let op = k1_op();
        let seq = select_sequence(&op, &Poly::from_real(&[-0.5, 1.0]), &[4, 6]).unwrap();
        assert!((seq[0].b() - c(2.0, 0.0)).norm() < 1e-10);
        assert!((seq[1].b() - c(3.0, 0.0)).norm() < 1e-10);
        let seq = select_sequence(&op, &Poly::new(vec![c(-1.0 / 3.0, 0.0), ONE]), &[9]).unwrap();
        assert!((seq[0].b() - c(3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn log_derivative_ratios_match_direct_evaluation() {
        let roots = [c(0.5, 1.0), c(-1.0, 0.2), c(2.0, -0.7), c(0.1, 0.1)];
        let s = Poly::from_roots(&roots);
        let w = c(1.3, -2.1);
        let ratios = log_derivative_ratios(&roots, w, 3);
        for (i, ratio) in ratios.iter().enumerate() {
            let direct = s.nth_derivative(i).eval(w) / s.eval(w);
            assert!((ratio - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }
}

//! Dense complex linear algebra: LU solves, balancing, Hessenberg reduction,
//! shifted QR eigenvalues and inverse-iteration eigenvectors.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::poly::Poly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension { rows, cols });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension { rows: r, cols: c });
        }
        Ok(ComplexMatrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Companion matrix whose eigenvalues are the roots of `p`.
    pub fn companion(p: &Poly) -> Result<Self> {
        let n = p.degree().ok_or(Error::ZeroPolynomial)?;
        if n == 0 {
            return Err(Error::DegreeTooSmall { degree: 0, needed: 1 });
        }
        let lead = p.leading().unwrap();
        let mut m = Self::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = ONE;
        }
        for i in 0..n {
            m[(i, n - 1)] = -p.coeff(i) / lead;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                rows: other.rows,
                cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// `A - shift * I`
    pub fn shifted(&self, shift: Complex64) -> ComplexMatrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] -= shift;
        }
        out
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() && self.rows > 0 {
            Ok(())
        } else {
            Err(Error::Dimension {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn norm_inf_vec(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn norm2_vec(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    /// Fails with `Singular` when a pivot falls below `1e-14 * ||A||_inf`.
    pub fn factor(a: &ComplexMatrix) -> Result<Lu> {
        let threshold = 1e-14 * a.norm_inf();
        Self::factor_inner(a, Some(threshold))
    }

    /// Never fails; zero pivots are replaced by `eps * ||A||_inf`, as wanted
    /// by inverse iteration at an exact eigenvalue.
    fn factor_regularized(a: &ComplexMatrix) -> Lu {
        Self::factor_inner(a, None).expect("regularized LU cannot fail")
    }

    fn factor_inner(a: &ComplexMatrix, threshold: Option<f64>) -> Result<Lu> {
        a.require_square()?;
        let n = a.rows;
        let floor = f64::EPSILON * a.norm_inf().max(f64::MIN_POSITIVE);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            match threshold {
                Some(t) if pmax <= t => return Err(Error::Singular { column: k, pivot: pmax }),
                None if pmax <= floor => lu[(p, k)] = Complex64::new(floor, 0.0),
                _ => {}
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Lu { lu, perm, swaps })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn det(&self) -> Complex64 {
        let d: Complex64 = (0..self.lu.rows).map(|i| self.lu[(i, i)]).product();
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

/// Solves `A x = b` with partial pivoting.
pub fn lu_solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != a.rows {
        return Err(Error::Dimension {
            rows: b.len(),
            cols: 1,
        });
    }
    Ok(Lu::factor(a)?.solve(b))
}

pub fn determinant(a: &ComplexMatrix) -> Result<Complex64> {
    a.require_square()?;
    match Lu::factor(a) {
        Ok(lu) => Ok(lu.det()),
        Err(Error::Singular { .. }) => Ok(ZERO),
        Err(e) => Err(e),
    }
}

fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Diagonal similarity `D^{-1} A D` with power-of-two entries that roughly
/// equalizes row and column norms. Returns the balanced matrix and `D`.
pub fn balance(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>) {
    let n = a.rows;
    let mut b = a.clone();
    let mut d = vec![1.0; n];
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += abs1(b[(j, i)]);
                    r += abs1(b[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut c2, mut r2) = (c, r);
            while c2 < r2 / RADIX {
                c2 *= RADIX;
                r2 /= RADIX;
                f *= RADIX;
            }
            while c2 >= r2 * RADIX {
                c2 /= RADIX;
                r2 *= RADIX;
                f /= RADIX;
            }
            if (c2 + r2) < 0.95 * s * 1.0 && f != 1.0 {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, d)
}

/// Householder reduction to upper Hessenberg form (similarity transform).
pub fn hessenberg(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_square()?;
    let n = a.rows;
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let alpha_norm: f64 = ((k + 1)..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let mut v: Vec<Complex64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- (I - 2 v v^H / v^H v) H
        for j in 0..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * h[(k + 1 + t, j)])
                .sum();
            let f = dot * (2.0 / vnorm2);
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vi * f;
            }
        }
        // H <- H (I - 2 v v^H / v^H v)
        for i in 0..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| h[(i, k + 1 + t)] * vi)
                .sum();
            let f = dot * (2.0 / vnorm2);
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= f * vi.conj();
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
    Ok(h)
}

/// Eigenvalue of the 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr_half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let l1 = tr_half + root;
    let l2 = tr_half - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Givens rotation `[[c, s], [-conj(s), c]]` with real `c` mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let fa = f.norm();
    let ga = g.norm();
    if ga == 0.0 {
        return (1.0, ZERO);
    }
    if fa == 0.0 {
        return (0.0, (g / ga).conj());
    }
    let norm = fa.hypot(ga);
    let c = fa / norm;
    let s = (f / fa) * g.conj() / norm;
    (c, s)
}

/// All eigenvalues of a square matrix: balance, Hessenberg reduction, then
/// single-shift complex QR with Wilkinson shifts and deflation.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    a.require_square()?;
    let n = a.rows;
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let (balanced, _) = balance(a);
    let mut h = hessenberg(&balanced)?;
    let mut eig = vec![ZERO; n];
    let mut found = vec![false; n];
    let max_total = 40 * n;
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut since_deflation = 0usize;
    loop {
        // look for a negligible subdiagonal entry in the active block
        let mut l = hi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let scale = if s == 0.0 { h.norm_inf() } else { s };
            if h[(l, l - 1)].norm() <= f64::EPSILON * scale {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            found[hi] = true;
            since_deflation = 0;
            if hi == 0 {
                break;
            }
            hi -= 1;
            continue;
        }
        if total >= max_total {
            let partial = (0..n).filter(|&i| found[i]).map(|i| eig[i]).collect();
            return Err(Error::QrNotConverged {
                iterations: total,
                partial,
            });
        }
        total += 1;
        since_deflation += 1;
        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_step(&mut h, l, hi, shift);
    }
    Ok(eig)
}

/// One shifted QR sweep `H - mu I = QR`, `H <- RQ + mu I` on the block `lo..=hi`.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        rotations.push((c, s));
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
    }
    for (idx, &(c, s)) in rotations.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in lo..=top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

/// Eigenpair produced by inverse iteration.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    /// Rayleigh-quotient estimate of the eigenvalue.
    pub value: Complex64,
    /// Unit 2-norm eigenvector.
    pub vector: Vec<Complex64>,
    /// `||A v - value v||_inf / ||A||_inf`
    pub residual: f64,
}

const INVERSE_ITERATIONS: usize = 5;
const EIGENVECTOR_TOL: f64 = 1e-8;

/// Unit eigenvector for an approximate eigenvalue, by inverse iteration.
pub fn eigenvector(a: &ComplexMatrix, lambda: Complex64) -> Result<Vec<Complex64>> {
    eigenvector_seeded(a, lambda, 0xe16e).map(|pair| pair.vector)
}

/// Inverse iteration from a seeded random start, at most five solves.
pub fn eigenvector_seeded(a: &ComplexMatrix, lambda: Complex64, seed: u64) -> Result<Eigenpair> {
    a.require_square()?;
    let n = a.rows;
    let anorm = a.norm_inf().max(f64::MIN_POSITIVE);
    let lu = Lu::factor_regularized(&a.shifted(lambda));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut v);
    let mut best: Option<Eigenpair> = None;
    for _ in 0..INVERSE_ITERATIONS {
        let mut x = lu.solve(&v);
        if x.iter().any(|c| !c.is_finite()) {
            break;
        }
        normalize(&mut x);
        v = x;
        let av = a.mul_vec(&v);
        let rq: Complex64 = v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum();
        let res_rq: f64 = norm_inf_vec(
            &av.iter().zip(&v).map(|(y, x)| y - rq * x).collect::<Vec<_>>(),
        ) / anorm;
        let candidate = Eigenpair {
            value: rq,
            vector: v.clone(),
            residual: res_rq,
        };
        if best.as_ref().is_none_or(|b| candidate.residual < b.residual) {
            best = Some(candidate);
        }
        if res_rq <= 0.01 * EIGENVECTOR_TOL {
            break;
        }
    }
    match best {
        Some(pair) if pair.residual <= EIGENVECTOR_TOL => Ok(pair),
        Some(pair) => Err(Error::EigenvectorNotConverged {
            residual: pair.residual,
        }),
        None => Err(Error::EigenvectorNotConverged {
            residual: f64::INFINITY,
        }),
    }
}

fn normalize(v: &mut [Complex64]) {
    let norm = norm2_vec(v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

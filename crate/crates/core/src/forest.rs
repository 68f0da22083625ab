//! Geometry of the limiting root measure.
//!
//! The limit Cauchy transform is a branch of `w = (Vt/Qt)^{1/k}` with
//! `w ~ 1/z` at infinity. This module continues that branch along paths,
//! integrates it to the canonical coordinate `Psi = int w dz`, traces
//! trajectories of the line field `w dz`, rebuilds the support forest from
//! a cloud of Stieltjes roots and checks its structural properties.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{segment_distance, ConvexHull, Poly};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Minimal distance a continuation path keeps from roots of `Vt` and `Qt`.
pub const PATH_STANDOFF: f64 = 1e-6;
/// Radius of the disks around roots where trajectories stop.
pub const ROOT_DISK: f64 = 1e-4;
/// Roots closer than this (relative to their modulus) are merged into one
/// root with multiplicity.
const MERGE_TOL: f64 = 1e-6;
const SHARED_ROOT_TOL: f64 = 1e-8;
const QUAD_TOL: f64 = 1e-10;
const QUAD_DEPTH: usize = 48;

// 10-point Gauss-Legendre rule on [-1, 1], nodes ascending
const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_1,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982,
    0.269_266_719_309_996_4,
    0.295_524_224_714_752_9,
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// A distinct root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub z: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootKind {
    V,
    Q,
}

fn cluster_roots(roots: &[Complex64]) -> Vec<BranchPoint> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        let tol = MERGE_TOL * (1.0 + r.norm());
        match out
            .iter_mut()
            .find(|(c, m)| (*c / *m as f64 - r).norm() <= tol)
        {
            Some((c, m)) => {
                *c += r;
                *m += 1;
            }
            None => out.push((r, 1)),
        }
    }
    out.into_iter()
        .map(|(c, m)| BranchPoint {
            z: c / m as f64,
            multiplicity: m,
        })
        .collect()
}

fn roots_loose(p: &Poly) -> Result<Vec<Complex64>> {
    match p.degree() {
        None => Err(Error::ZeroPolynomial),
        Some(0) => Ok(Vec::new()),
        Some(_) => match p.roots() {
            Ok(r) => Ok(r),
            Err(Error::RootsNotConverged { best, .. }) => Ok(best),
            Err(e) => Err(e),
        },
    }
}

/// The branch of `(Vt/Qt)^{1/k}` with `1/z` asymptotics at infinity.
#[derive(Debug, Clone)]
pub struct AlgebraicBranch {
    vt: Poly,
    qt: Poly,
    k: usize,
    v_roots: Vec<BranchPoint>,
    q_roots: Vec<BranchPoint>,
    anchor_z: Complex64,
    anchor_w: Complex64,
}

impl AlgebraicBranch {
    /// Branch from polynomials; both are made monic.
    pub fn new(vt: &Poly, qt: &Poly, k: usize) -> Result<Self> {
        let vr = roots_loose(vt)?;
        let qr = roots_loose(qt)?;
        Self::build(vt.monic()?, qt.monic()?, k, &vr, &qr)
    }

    /// Branch from root lists, repeated entries giving multiplicity.
    pub fn from_roots(v_roots: &[Complex64], q_roots: &[Complex64], k: usize) -> Result<Self> {
        Self::build(
            Poly::from_roots(v_roots),
            Poly::from_roots(q_roots),
            k,
            v_roots,
            q_roots,
        )
    }

    fn build(vt: Poly, qt: Poly, k: usize, vr: &[Complex64], qr: &[Complex64]) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidBranch("order k must be at least 1".into()));
        }
        let dv = vt.degree().ok_or(Error::ZeroPolynomial)?;
        let dq = qt.degree().ok_or(Error::ZeroPolynomial)?;
        if dq != dv + k {
            return Err(Error::InvalidBranch(format!(
                "deg Qt - deg Vt = {} but k = {k}",
                dq as i64 - dv as i64
            )));
        }
        let v_roots = cluster_roots(vr);
        let q_roots = cluster_roots(qr);
        for v in &v_roots {
            for q in &q_roots {
                if (v.z - q.z).norm() < SHARED_ROOT_TOL * (1.0 + v.z.norm()) {
                    return Err(Error::InvalidBranch(format!(
                        "Vt and Qt share the root {}",
                        v.z
                    )));
                }
            }
        }
        let max_mod = v_roots
            .iter()
            .chain(&q_roots)
            .map(|b| b.z.norm())
            .fold(0.0, f64::max);
        let anchor_z = Complex64::new(2.0 * max_mod + 2.0, 0.0);
        let mut branch = AlgebraicBranch {
            vt,
            qt,
            k,
            v_roots,
            q_roots,
            anchor_z,
            anchor_w: Complex64::new(0.0, 0.0),
        };
        branch.anchor_w = branch.nearest_root(anchor_z, anchor_z.inv());
        Ok(branch)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vt(&self) -> &Poly {
        &self.vt
    }

    pub fn qt(&self) -> &Poly {
        &self.qt
    }

    pub fn v_roots(&self) -> &[BranchPoint] {
        &self.v_roots
    }

    pub fn q_roots(&self) -> &[BranchPoint] {
        &self.q_roots
    }

    pub fn anchor(&self) -> (Complex64, Complex64) {
        (self.anchor_z, self.anchor_w)
    }

    /// All distinct roots of `Vt` and `Qt`, tagged.
    pub fn singular_points(&self) -> impl Iterator<Item = (RootKind, usize, &BranchPoint)> {
        self.v_roots
            .iter()
            .enumerate()
            .map(|(i, b)| (RootKind::V, i, b))
            .chain(
                self.q_roots
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (RootKind::Q, i, b)),
            )
    }

    pub fn ratio(&self, z: Complex64) -> Complex64 {
        self.vt.eval(z) / self.qt.eval(z)
    }

    /// `w'/w = (1/k) (Vt'/Vt - Qt'/Qt)`.
    pub fn log_derivative(&self, z: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for b in &self.v_roots {
            s += b.multiplicity as f64 / (z - b.z);
        }
        for b in &self.q_roots {
            s -= b.multiplicity as f64 / (z - b.z);
        }
        s / self.k as f64
    }

    pub fn singular_distance(&self, z: Complex64) -> f64 {
        self.singular_points()
            .map(|(_, _, b)| (z - b.z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nearest_singularity(&self, z: Complex64) -> Option<(RootKind, usize, f64)> {
        self.singular_points()
            .map(|(kind, i, b)| (kind, i, (z - b.z).norm()))
            .min_by(|a, b| a.2.total_cmp(&b.2))
    }

    /// The `k` values `w` with `w^k = Vt(z)/Qt(z)`.
    pub fn candidates(&self, z: Complex64) -> Vec<Complex64> {
        let f = self.ratio(z);
        let m = f.norm().powf(1.0 / self.k as f64);
        let a = f.arg();
        (0..self.k)
            .map(|j| Complex64::from_polar(m, (a + 2.0 * PI * j as f64) / self.k as f64))
            .collect()
    }

    pub fn nearest_root(&self, z: Complex64, reference: Complex64) -> Complex64 {
        self.candidates(z)
            .into_iter()
            .min_by(|a, b| (a - reference).norm().total_cmp(&(b - reference).norm()))
            .unwrap_or(reference)
    }

    fn predict(&self, z0: Complex64, w0: Complex64, z1: Complex64) -> Complex64 {
        let dz = z1 - z0;
        let pred = w0 * (dz * self.log_derivative(z0 + dz * 0.5)).exp();
        self.nearest_root(z1, pred)
    }

    /// Continues the value `w0` at `z0` along the straight segment to `z1`.
    /// `segment` only labels errors.
    pub fn continue_segment(
        &self,
        z0: Complex64,
        w0: Complex64,
        z1: Complex64,
        segment: usize,
    ) -> Result<Complex64> {
        let clearance = self
            .singular_points()
            .map(|(_, _, b)| segment_distance(b.z, z0, z1))
            .fold(f64::INFINITY, f64::min);
        if clearance < PATH_STANDOFF {
            return Err(Error::NearBranchPoint {
                segment,
                distance: clearance,
            });
        }
        if self.k == 1 {
            return Ok(self.ratio(z1));
        }
        let total = (z1 - z0).norm();
        let mut w = self.nearest_root(z0, w0);
        if total == 0.0 {
            return Ok(w);
        }
        let dir = (z1 - z0) / total;
        let sep = 2.0 * (PI / self.k as f64).sin();
        let mut t = 0.0;
        let mut z = z0;
        while t < total {
            let mut h = (total - t).min(0.5 * self.singular_distance(z));
            loop {
                let (tn, zn) = if t + h >= total {
                    (total, z1)
                } else {
                    (t + h, z0 + dir * (t + h))
                };
                let dz = zn - z;
                let pred = w * (dz * self.log_derivative(z + dz * 0.5)).exp();
                let cand = self.nearest_root(zn, pred);
                if (cand - pred).norm() <= 0.2 * sep * cand.norm() {
                    t = tn;
                    z = zn;
                    w = cand;
                    break;
                }
                h *= 0.5;
                if h < 1e-15 * (1.0 + z.norm()) {
                    return Err(Error::NearBranchPoint {
                        segment,
                        distance: self.singular_distance(z),
                    });
                }
            }
        }
        Ok(w)
    }

    /// Continues `w0` at `path[0]` along the polyline; returns the value at
    /// the last vertex.
    pub fn continue_path(&self, path: &[Complex64], w0: Complex64) -> Result<Complex64> {
        let mut w = match path.first() {
            Some(&z) => self.nearest_root(z, w0),
            None => return Err(Error::EmptyPointSet),
        };
        for (i, seg) in path.windows(2).enumerate() {
            w = self.continue_segment(seg[0], w, seg[1], i)?;
        }
        Ok(w)
    }

    /// Path from the anchor along the circle `|z| = |anchor|` to `arg z`,
    /// then radially to `z`.
    pub fn default_path(&self, z: Complex64) -> Vec<Complex64> {
        let r = self.anchor_z.re;
        let theta = if z.norm() == 0.0 { 0.0 } else { z.arg() };
        let steps = (theta.abs() / 0.05).ceil() as usize;
        let mut path = Vec::with_capacity(steps + 2);
        for j in 0..=steps {
            let t = if steps == 0 {
                0.0
            } else {
                theta * j as f64 / steps as f64
            };
            path.push(Complex64::from_polar(r, t));
        }
        if (z - path[path.len() - 1]).norm() > 0.0 {
            path.push(z);
        }
        path
    }

    /// Branch value at `z` reached along [`default_path`](Self::default_path).
    pub fn eval_at(&self, z: Complex64) -> Result<Complex64> {
        self.continue_path(&self.default_path(z), self.anchor_w)
    }

    /// Branch value at the end of `path`. A path that does not start at the
    /// anchor is prefixed by the default path to its first point.
    pub fn branch_eval(&self, path: &[Complex64]) -> Result<Complex64> {
        let first = *path.first().ok_or(Error::EmptyPointSet)?;
        if (first - self.anchor_z).norm() <= 1e-12 * self.anchor_z.norm() {
            return self.continue_path(path, self.anchor_w);
        }
        let mut full = self.default_path(first);
        full.extend_from_slice(&path[1..]);
        self.continue_path(&full, self.anchor_w)
    }

    fn gauss(
        &self,
        a: Complex64,
        b: Complex64,
        wa: Complex64,
        segment: usize,
    ) -> Result<(Complex64, Complex64)> {
        let mid = (a + b) * 0.5;
        let half = (b - a) * 0.5;
        let mut z = a;
        let mut w = wa;
        let mut sum = Complex64::new(0.0, 0.0);
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let zn = mid + half * *x;
            w = self.continue_segment(z, w, zn, segment)?;
            z = zn;
            sum += w * wt;
        }
        let wb = self.continue_segment(z, w, b, segment)?;
        Ok((sum * half, wb))
    }

    #[allow(clippy::too_many_arguments)]
    fn adapt(
        &self,
        a: Complex64,
        b: Complex64,
        wa: Complex64,
        whole: Complex64,
        depth: usize,
        segment: usize,
    ) -> Result<(Complex64, Complex64)> {
        let m = (a + b) * 0.5;
        let (l, wm) = self.gauss(a, m, wa, segment)?;
        let (r, wb) = self.gauss(m, b, wm, segment)?;
        let scale = 1.0f64.max((l.norm() + r.norm()) / (b - a).norm());
        if (l + r - whole).norm() <= QUAD_TOL * (b - a).norm() * scale {
            return Ok((l + r, wb));
        }
        if depth >= QUAD_DEPTH {
            return Err(Error::QuadratureNotConverged { segment });
        }
        let (li, wm2) = self.adapt(a, m, wa, l, depth + 1, segment)?;
        let (ri, wb2) = self.adapt(m, b, wm2, r, depth + 1, segment)?;
        Ok((li + ri, wb2))
    }

    /// `int_{a}^{b} w dz` along a straight segment, `w` starting from `wa`.
    /// Returns the integral and the continued value at `b`.
    pub fn integrate_segment(
        &self,
        a: Complex64,
        b: Complex64,
        wa: Complex64,
        segment: usize,
    ) -> Result<(Complex64, Complex64)> {
        if a == b {
            return Ok((Complex64::new(0.0, 0.0), self.nearest_root(a, wa)));
        }
        let wa = self.nearest_root(a, wa);
        let (whole, _) = self.gauss(a, b, wa, segment)?;
        self.adapt(a, b, wa, whole, 0, segment)
    }

    /// `Psi` at every vertex of `path` relative to `path[0]`, with the branch
    /// started from `w0` at `path[0]`.
    pub fn psi_profile(&self, path: &[Complex64], w0: Complex64) -> Result<PsiProfile> {
        let first = *path.first().ok_or(Error::EmptyPointSet)?;
        let mut w = self.nearest_root(first, w0);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut values = vec![acc];
        let mut branch = vec![w];
        for (i, seg) in path.windows(2).enumerate() {
            let (part, wb) = self.integrate_segment(seg[0], seg[1], w, i)?;
            acc += part;
            w = wb;
            values.push(acc);
            branch.push(w);
        }
        Ok(PsiProfile { values, branch })
    }

    /// `Psi(end) - Psi(start)` along `path`, the branch at `path[0]` being
    /// the one reached from the anchor by the default path.
    pub fn psi(&self, path: &[Complex64]) -> Result<Complex64> {
        let first = *path.first().ok_or(Error::EmptyPointSet)?;
        let w0 = self.eval_at(first)?;
        let prof = self.psi_profile(path, w0)?;
        Ok(*prof.values.last().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiProfile {
    pub values: Vec<Complex64>,
    pub branch: Vec<Complex64>,
}

// ---------------------------------------------------------------------------
// trajectories

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Root { kind: RootKind, index: usize },
    LeftBox,
    MaxLength,
    Recurrent,
    Barrier { barrier: usize, point: Complex64 },
}

/// Trajectories satisfy `Im(e^{i rotation} Psi) = const`; `rotation = 0`
/// gives the gradient lines of the potential, `pi/2` its level lines.
#[derive(Debug, Clone)]
pub struct TraceParams {
    pub rotation: f64,
    pub root_radius: f64,
    pub box_margin: f64,
    pub max_length: Option<f64>,
    pub tol: f64,
    pub max_step: Option<f64>,
    /// Polylines that stop the trajectory when crossed.
    pub barriers: Vec<Vec<Complex64>>,
    pub barrier_radius: f64,
    /// Barrier hits within this distance of the start are ignored.
    pub barrier_exclusion: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            rotation: 0.0,
            root_radius: ROOT_DISK,
            box_margin: 3.0,
            max_length: None,
            tol: 1e-8,
            max_step: None,
            barriers: Vec::new(),
            barrier_radius: 1e-3,
            barrier_exclusion: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<Complex64>,
    /// Branch values at `points`.
    pub branch: Vec<Complex64>,
    /// `Psi` at `points` relative to the start.
    pub psi: Vec<Complex64>,
    pub length: f64,
    pub rotation: f64,
    pub termination: Termination,
}

impl Trajectory {
    /// Largest `|Im(e^{i rotation} Psi)|` along the trajectory.
    pub fn transverse_drift(&self) -> f64 {
        let rot = Complex64::from_polar(1.0, self.rotation);
        self.psi
            .iter()
            .map(|p| (rot * p).im.abs())
            .fold(0.0, f64::max)
    }
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Option<Complex64> {
    let r = b - a;
    let s = d - c;
    let denom = r.re * s.im - r.im * s.re;
    if denom == 0.0 {
        return None;
    }
    let ca = c - a;
    let t = (ca.re * s.im - ca.im * s.re) / denom;
    let u = (ca.re * r.im - ca.im * r.re) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(a + r * t)
    } else {
        None
    }
}

fn closest_on_segment(z: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return a;
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn barrier_hit(
    params: &TraceParams,
    origin: Complex64,
    a: Complex64,
    b: Complex64,
) -> Option<(usize, Complex64)> {
    for (bi, line) in params.barriers.iter().enumerate() {
        if line.len() == 1 {
            let p = line[0];
            if segment_distance(p, a, b) <= params.barrier_radius
                && (p - origin).norm() > params.barrier_exclusion
            {
                return Some((bi, p));
            }
            continue;
        }
        for seg in line.windows(2) {
            let hit = segments_cross(a, b, seg[0], seg[1]).or_else(|| {
                let p = closest_on_segment(b, seg[0], seg[1]);
                ((p - b).norm() <= params.barrier_radius).then_some(p)
            });
            if let Some(p) = hit {
                if (p - origin).norm() > params.barrier_exclusion {
                    return Some((bi, p));
                }
            }
        }
    }
    None
}

/// Traces the trajectory of `w dz` through `start` in the given direction.
///
/// `w_start` picks the sheet: the candidate nearest to it is used at
/// `start`. The direction must satisfy `Im(e^{i rotation} w direction) ~ 0`
/// and fixes the orientation.
pub fn trace_trajectory(
    b: &AlgebraicBranch,
    start: Complex64,
    w_start: Complex64,
    direction: Complex64,
    params: &TraceParams,
) -> Result<Trajectory> {
    let d0 = b.singular_distance(start);
    if d0 < PATH_STANDOFF {
        return Err(Error::NearBranchPoint {
            segment: 0,
            distance: d0,
        });
    }
    if direction.norm() == 0.0 {
        return Err(Error::Invalid("zero trajectory direction".into()));
    }
    let dir = direction / direction.norm();
    let rot = Complex64::from_polar(1.0, params.rotation);
    let w0 = b.nearest_root(start, w_start);
    let g = rot * w0 * dir;
    if g.im.abs() > 0.1 * g.norm() {
        return Err(Error::Invalid(format!(
            "direction {dir} is not along the line field at {start}"
        )));
    }
    let sigma = g.re.signum();
    let field = |w: Complex64| (rot * w).conj() * (sigma / w.norm());

    let roots: Vec<Complex64> = b.singular_points().map(|(_, _, p)| p.z).collect();
    let hull = ConvexHull::new(&roots)?;
    let max_len = params
        .max_length
        .unwrap_or(20.0 * (hull.diameter() + 2.0 * params.box_margin));
    let h_max = params
        .max_step
        .unwrap_or(0.02 * (hull.diameter() + 2.0 * params.box_margin));
    // the root the trajectory starts next to does not stop it until it has
    // moved away
    let mut excluded = b
        .nearest_singularity(start)
        .filter(|(_, _, d)| *d <= 100.0 * params.root_radius.max(PATH_STANDOFF))
        .map(|(kind, i, d)| (kind, i, 2.0 * d));

    let mut points = vec![start];
    let mut branch = vec![w0];
    let mut psi = vec![Complex64::new(0.0, 0.0)];
    let mut length = 0.0;
    let mut z = start;
    let mut w = w0;
    let mut h = (0.25 * d0).min(h_max);
    let termination;
    loop {
        if let Some((kind, i, d)) = b.nearest_singularity(z) {
            if let Some((ek, ei, leave)) = excluded {
                if ek == kind && ei == i && d < leave {
                    // still next to the starting root
                } else if d > leave || ek != kind || ei != i {
                    excluded = None;
                }
            }
            let blocked = excluded.is_some_and(|(ek, ei, _)| ek == kind && ei == i);
            if d <= params.root_radius && !blocked {
                termination = Termination::Root { kind, index: i };
                break;
            }
        }
        if hull.distance(z) > params.box_margin {
            termination = Termination::LeftBox;
            break;
        }
        if length >= max_len {
            termination = Termination::MaxLength;
            break;
        }
        let d = b.singular_distance(z);
        h = h.min(0.25 * d).min(h_max);

        // RK4 with step doubling; branch values follow by local prediction
        let rk = |z0: Complex64, w0: Complex64, h: f64| {
            let k1 = field(w0);
            let z2 = z0 + k1 * (0.5 * h);
            let w2 = b.predict(z0, w0, z2);
            let k2 = field(w2);
            let z3 = z0 + k2 * (0.5 * h);
            let w3 = b.predict(z0, w0, z3);
            let k3 = field(w3);
            let z4 = z0 + k3 * h;
            let w4 = b.predict(z0, w0, z4);
            let k4 = field(w4);
            let zn = z0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            (zn, b.predict(z0, w0, zn))
        };
        let (full, _) = rk(z, w, h);
        let (zm, wm) = rk(z, w, 0.5 * h);
        let (zn, _) = rk(zm, wm, 0.5 * h);
        let err = (full - zn).norm();
        if err > params.tol {
            h *= 0.5;
            if h < 1e-13 * (1.0 + z.norm()) {
                return Err(Error::StepCollapse {
                    z,
                    steps: points.len(),
                    trace: points,
                });
            }
            continue;
        }
        let mut znew = zn;
        let mut wnew = b.continue_segment(z, w, znew, points.len())?;
        let base = *psi.last().unwrap();
        let (mut dpsi, _) = b.gauss(z, znew, w, points.len())?;
        // pull the point back onto the level set of Im(rot Psi)
        let drift = (rot * (base + dpsi)).im;
        if drift != 0.0 {
            znew -= I * drift / (rot * wnew);
            wnew = b.nearest_root(znew, wnew);
            dpsi = b.gauss(z, znew, w, points.len())?.0;
        }
        if let Some((bi, p)) = barrier_hit(params, start, z, znew) {
            points.push(p);
            branch.push(b.nearest_root(p, wnew));
            psi.push(base + b.gauss(z, p, w, points.len())?.0);
            length += (p - z).norm();
            termination = Termination::Barrier {
                barrier: bi,
                point: p,
            };
            break;
        }
        let step = (znew - z).norm();
        // recurrence guard: coming back to a point seen long ago
        let recurrent = points.len() > 20
            && points[..points.len() - 20]
                .iter()
                .any(|p| (p - znew).norm() < 0.5 * step.max(1e-12));
        length += step;
        z = znew;
        w = wnew;
        points.push(z);
        branch.push(w);
        psi.push(base + dpsi);
        if recurrent {
            termination = Termination::Recurrent;
            break;
        }
        if err < params.tol / 32.0 {
            h *= 2.0;
        }
    }
    Ok(Trajectory {
        points,
        branch,
        psi,
        length,
        rotation: params.rotation,
        termination,
    })
}

/// Unit directions at a root `alpha` of `Vt` of multiplicity `p` along which
/// `Psi - Psi(alpha)` is real and negative on some sheet: the `k + p` rays
/// `(2 pi N + k pi - arg c) / (k + p)` with `c = Vt^{(p)}(alpha) / (p! Qt(alpha))`.
pub fn descending_directions(b: &AlgebraicBranch, root: &BranchPoint) -> Vec<Complex64> {
    let p = root.multiplicity;
    let k = b.k;
    let mut fact = 1.0;
    for i in 2..=p {
        fact *= i as f64;
    }
    let c = b.vt.nth_derivative(p).eval(root.z) / (b.qt.eval(root.z) * fact);
    let m = (k + p) as f64;
    (0..k + p)
        .map(|n| {
            let phi = (2.0 * PI * n as f64 + k as f64 * PI - c.arg()) / m;
            Complex64::from_polar(1.0, phi)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// support forests

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    VZero,
    QZero,
    Junction,
    Atom,
    /// A leaf not matched to any root.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub z: Complex64,
    pub kind: VertexKind,
    /// Multiplicity of the root the vertex sits on, 0 otherwise.
    pub multiplicity: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    /// Arc length from the first polyline vertex.
    pub s: f64,
    pub z: Complex64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub polyline: Vec<Complex64>,
    pub density: Vec<DensitySample>,
    pub mass: f64,
    /// Density samples that could not be evaluated.
    pub skipped: usize,
    pub exceptional: bool,
}

impl Edge {
    fn new(from: usize, to: usize, polyline: Vec<Complex64>) -> Self {
        Edge {
            from,
            to,
            polyline,
            density: Vec::new(),
            mass: 0.0,
            skipped: 0,
            exceptional: false,
        }
    }

    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        match self.polyline.len() {
            0 => f64::INFINITY,
            1 => (z - self.polyline[0]).norm(),
            _ => self
                .polyline
                .windows(2)
                .map(|s| segment_distance(z, s[0], s[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Point and unit tangent at arc length `s`.
    pub fn point_at(&self, s: f64) -> (Complex64, Complex64) {
        let mut rest = s.max(0.0);
        let n = self.polyline.len();
        for (i, seg) in self.polyline.windows(2).enumerate() {
            let len = (seg[1] - seg[0]).norm();
            if len == 0.0 {
                continue;
            }
            let t = (seg[1] - seg[0]) / len;
            if rest <= len || i + 2 == n {
                return (seg[0] + t * rest.min(len), t);
            }
            rest -= len;
        }
        (self.polyline[0], Complex64::new(1.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportForest {
    pub k: usize,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Points the forest was built from.
    pub cloud: Vec<Complex64>,
    /// Points dropped as isolated after cutting long edges.
    pub outliers: usize,
}

impl SupportForest {
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.from == v) as usize + (e.to == v) as usize)
            .sum()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.degree(v) == 1)
            .collect()
    }

    /// Leaves that are not roots of `Vt`, `Qt` or atoms.
    pub fn unclassified_leaves(&self) -> Vec<usize> {
        self.leaves()
            .into_iter()
            .filter(|&v| matches!(self.vertices[v].kind, VertexKind::Free | VertexKind::Junction))
            .collect()
    }

    /// Connected components as vertex index sets, optionally ignoring
    /// exceptional edges.
    pub fn components(&self, include_exceptional: bool) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            if e.exceptional && !include_exceptional {
                continue;
            }
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            // exceptional-only vertices are not part of the plain forest
            if !include_exceptional
                && adj[s].is_empty()
                && self.edges.iter().any(|e| e.from == s || e.to == s)
            {
                seen[s] = true;
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn component_distance(&self, comp: &[usize], z: Complex64, include_exceptional: bool) -> f64 {
        let mut d = comp
            .iter()
            .map(|&v| (self.vertices[v].z - z).norm())
            .fold(f64::INFINITY, f64::min);
        for e in &self.edges {
            if e.exceptional && !include_exceptional {
                continue;
            }
            if comp.binary_search(&e.from).is_ok() {
                d = d.min(e.distance(z));
            }
        }
        d
    }

    /// Distance from `z` to the non-exceptional part of the forest.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        let mut d = f64::INFINITY;
        for e in self.edges.iter().filter(|e| !e.exceptional) {
            d = d.min(e.distance(z));
        }
        for v in &self.vertices {
            if v.kind == VertexKind::Atom {
                d = d.min((v.z - z).norm());
            }
        }
        d
    }

    /// One-sided Hausdorff distance `max_p dist(p, forest)`.
    pub fn hausdorff_from(&self, points: &[Complex64]) -> f64 {
        points
            .iter()
            .map(|&p| self.distance_to(p))
            .fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.edges.iter().map(|e| e.mass).sum::<f64>()
            + self.vertices.iter().map(|v| v.mass).sum::<f64>()
    }

    pub fn export(&self) -> ForestExport {
        let comps = self.components(false);
        ForestExport {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexExport {
                    x: v.z.re,
                    y: v.z.im,
                    kind: v.kind,
                    multiplicity: v.multiplicity,
                    mass: v.mass,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeExport {
                    from: e.from,
                    to: e.to,
                    exceptional: e.exceptional,
                    polyline: e.polyline.iter().map(|z| [z.re, z.im]).collect(),
                    mass: e.mass,
                    density_samples: e.density.iter().map(|d| [d.s, d.rho]).collect(),
                })
                .collect(),
            components: comps,
            total_mass: self.total_mass(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexExport {
    pub x: f64,
    pub y: f64,
    pub kind: VertexKind,
    pub multiplicity: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub from: usize,
    pub to: usize,
    pub exceptional: bool,
    pub polyline: Vec<[f64; 2]>,
    pub mass: f64,
    /// `[arc length, density]` pairs.
    pub density_samples: Vec<[f64; 2]>,
}

/// Serializable form of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestExport {
    pub vertices: Vec<VertexExport>,
    pub edges: Vec<EdgeExport>,
    pub components: Vec<Vec<usize>>,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    /// MST edges longer than this multiple of the local median are cut.
    pub break_factor: f64,
    /// Douglas-Peucker tolerance.
    pub simplify: f64,
    /// Leaves within this distance of a root snap to it.
    pub snap: f64,
    /// The snap radius of a leaf is at least this multiple of the distance
    /// to its neighbour in the cloud.
    pub snap_spacing: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            break_factor: 3.0,
            simplify: 0.01,
            snap: 0.05,
            snap_spacing: 2.0,
        }
    }
}

pub const MIN_FOREST_POINTS: usize = 20;

fn minimum_spanning_tree(points: &[Complex64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    best[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u, best[u]));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = (points[u] - points[v]).norm();
                if d < best[v] {
                    best[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    edges
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Douglas-Peucker simplification keeping both endpoints.
pub fn simplify_polyline(points: &[Complex64], tol: f64) -> Vec<Complex64> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        let mut far = (0.0, a);
        for i in a + 1..b {
            let d = segment_distance(points[i], points[a], points[b]);
            if d > far.0 {
                far = (d, i);
            }
        }
        if far.0 > tol {
            keep[far.1] = true;
            stack.push((a, far.1));
            stack.push((far.1, b));
        }
    }
    points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// Rebuilds a support forest from a point cloud (typically the roots of a
/// Stieltjes polynomial of large degree).
///
/// With a branch, leaves are snapped to nearby roots of `Vt` and `Qt` and
/// roots of `Qt` of multiplicity exactly `k` become atoms absorbing the
/// points around them.
pub fn build_from_roots(
    points: &[Complex64],
    branch: Option<&AlgebraicBranch>,
    params: &ForestParams,
) -> Result<SupportForest> {
    if points.len() < MIN_FOREST_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FOREST_POINTS,
            got: points.len(),
        });
    }
    let k = branch.map_or(1, |b| b.k);
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut atoms: Vec<Complex64> = Vec::new();
    if let Some(b) = branch {
        for q in b.q_roots.iter().filter(|q| q.multiplicity == b.k) {
            atoms.push(q.z);
        }
    }
    let free: Vec<Complex64> = points
        .iter()
        .copied()
        .filter(|p| atoms.iter().all(|a| (p - a).norm() > params.snap))
        .collect();

    let mst = minimum_spanning_tree(&free);
    let n = free.len();
    let mut incident = vec![Vec::new(); n];
    for (ei, &(a, b, _)) in mst.iter().enumerate() {
        incident[a].push(ei);
        incident[b].push(ei);
    }
    let global = median(mst.iter().map(|e| e.2).filter(|&l| l > 0.0).collect()).unwrap_or(0.0);
    let mut adj = vec![Vec::new(); n];
    for (ei, &(a, b, len)) in mst.iter().enumerate() {
        // lengths of the other tree edges within two hops
        let mut near = Vec::new();
        let mut seen = vec![ei];
        for &end in &[a, b] {
            for &e1 in &incident[end] {
                if !seen.contains(&e1) {
                    seen.push(e1);
                    near.push(mst[e1].2);
                }
                let (x, y, _) = mst[e1];
                let other = if x == end { y } else { x };
                for &e2 in &incident[other] {
                    if !seen.contains(&e2) {
                        seen.push(e2);
                        near.push(mst[e2].2);
                    }
                }
            }
        }
        let local = match median(near) {
            Some(m) if m > 0.0 => m,
            Some(_) => global,
            None => f64::INFINITY,
        };
        if len > params.break_factor * local {
            continue;
        }
        adj[a].push(b);
        adj[b].push(a);
    }

    // split every tree at its vertices of degree != 2
    let mut vertex_of = vec![usize::MAX; n];
    let mut outliers = 0;
    for p in 0..n {
        let deg = adj[p].len();
        if deg == 0 {
            outliers += 1;
        } else if deg != 2 {
            vertex_of[p] = vertices.len();
            vertices.push(Vertex {
                z: free[p],
                kind: if deg == 1 {
                    VertexKind::Free
                } else {
                    VertexKind::Junction
                },
                multiplicity: 0,
                mass: 0.0,
            });
        }
    }
    let mut edges = Vec::new();
    let mut spacing = vec![0.0; vertices.len()];
    let mut used = std::collections::HashSet::new();
    for p in 0..n {
        if vertex_of[p] == usize::MAX {
            continue;
        }
        for &first in &adj[p] {
            if used.contains(&(p.min(first), p.max(first))) {
                continue;
            }
            let mut chain = vec![free[p]];
            spacing[vertex_of[p]] = (free[p] - free[first]).norm();
            let mut prev = p;
            let mut cur = first;
            used.insert((p.min(first), p.max(first)));
            while vertex_of[cur] == usize::MAX {
                chain.push(free[cur]);
                let next = if adj[cur][0] == prev {
                    adj[cur][1]
                } else {
                    adj[cur][0]
                };
                used.insert((cur.min(next), cur.max(next)));
                prev = cur;
                cur = next;
            }
            chain.push(free[cur]);
            spacing[vertex_of[cur]] = (free[cur] - free[prev]).norm();
            edges.push(Edge::new(
                vertex_of[p],
                vertex_of[cur],
                simplify_polyline(&chain, params.simplify),
            ));
        }
    }

    if let Some(b) = branch {
        for (vi, v) in vertices.iter_mut().enumerate() {
            if v.kind != VertexKind::Free {
                continue;
            }
            let radius = params.snap.max(params.snap_spacing * spacing[vi]);
            let best = b
                .singular_points()
                .filter(|(kind, _, r)| !(*kind == RootKind::Q && r.multiplicity == b.k))
                .map(|(kind, _, r)| (kind, *r, (r.z - v.z).norm()))
                .min_by(|a, c| a.2.total_cmp(&c.2));
            if let Some((kind, r, d)) = best {
                if d <= radius {
                    v.z = r.z;
                    v.kind = match kind {
                        RootKind::V => VertexKind::VZero,
                        RootKind::Q => VertexKind::QZero,
                    };
                    v.multiplicity = r.multiplicity;
                    // the edge is extended from the last sample to the root
                    for e in edges.iter_mut() {
                        if e.from == vi {
                            e.polyline.insert(0, r.z);
                        } else if e.to == vi {
                            e.polyline.push(r.z);
                        }
                    }
                }
            }
        }
    }
    for a in atoms {
        vertices.push(Vertex {
            z: a,
            kind: VertexKind::Atom,
            multiplicity: k,
            mass: 0.0,
        });
    }
    Ok(SupportForest {
        k,
        vertices,
        edges,
        cloud: points.to_vec(),
        outliers,
    })
}

// ---------------------------------------------------------------------------
// straightening

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStraightness {
    pub edge: usize,
    /// Largest distance of `Psi` samples from their best-fit line, divided
    /// by the `Psi`-length of the edge.
    pub deviation: f64,
    pub psi_length: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraighteningReport {
    pub tol: f64,
    pub edges: Vec<EdgeStraightness>,
    pub max_deviation: f64,
    pub pass: bool,
}

pub const STRAIGHT_TOL_EMPIRICAL: f64 = 0.05;
pub const STRAIGHT_TOL_TRACED: f64 = 1e-6;

fn resample(polyline: &[Complex64], pieces: usize) -> Vec<Complex64> {
    let total: f64 = polyline.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
    if total == 0.0 {
        return polyline.to_vec();
    }
    let max_len = total / pieces as f64;
    let mut out = vec![polyline[0]];
    for seg in polyline.windows(2) {
        let m = ((seg[1] - seg[0]).norm() / max_len).ceil().max(1.0) as usize;
        for j in 1..=m {
            out.push(seg[0] + (seg[1] - seg[0]) * (j as f64 / m as f64));
        }
    }
    out
}

/// Relative deviation of points from their total-least-squares line.
fn line_deviation(values: &[Complex64]) -> (f64, f64) {
    let n = values.len() as f64;
    let c = values.iter().sum::<Complex64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - c;
        sxx += d.re * d.re;
        syy += d.im * d.im;
        sxy += d.re * d.im;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let unit = Complex64::from_polar(1.0, -angle);
    let dev = values
        .iter()
        .map(|v| ((v - c) * unit).im.abs())
        .fold(0.0, f64::max);
    let length: f64 = values.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
    (dev, length)
}

fn straightness(b: &AlgebraicBranch, edge: &Edge, trim: f64) -> Result<(f64, f64)> {
    let mut pts = resample(&edge.polyline, 128);
    while pts.len() > 2 && b.singular_distance(pts[0]) < trim {
        pts.remove(0);
    }
    while pts.len() > 2 && b.singular_distance(pts[pts.len() - 1]) < trim {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(Error::Invalid("edge lies inside a root disk".into()));
    }
    if let Some(bad) = pts.iter().find(|&&p| b.singular_distance(p) < trim) {
        return Err(Error::Invalid(format!("edge passes through the root disk at {bad}")));
    }
    let mid = pts.len() / 2;
    let w_mid = b.candidates(pts[mid])[0];
    let forward = b.psi_profile(&pts[mid..], w_mid)?;
    let back: Vec<Complex64> = pts[..=mid].iter().rev().copied().collect();
    let backward = b.psi_profile(&back, w_mid)?;
    let mut values: Vec<Complex64> = backward.values.iter().rev().copied().collect();
    values.extend_from_slice(&forward.values[1..]);
    let (dev, len) = line_deviation(&values);
    if len == 0.0 {
        return Err(Error::Invalid("edge has zero Psi-length".into()));
    }
    Ok((dev / len, len))
}

/// Checks that `Psi` maps every non-exceptional edge to a straight segment.
pub fn verify_straightening(
    f: &SupportForest,
    b: &AlgebraicBranch,
    tol: f64,
) -> StraighteningReport {
    let trim = 10.0 * ROOT_DISK;
    let mut edges = Vec::new();
    for (i, e) in f.edges.iter().enumerate().filter(|(_, e)| !e.exceptional) {
        let entry = match straightness(b, e, trim) {
            Ok((deviation, psi_length)) => EdgeStraightness {
                edge: i,
                deviation,
                psi_length,
                pass: deviation <= tol,
                error: None,
            },
            Err(err) => EdgeStraightness {
                edge: i,
                deviation: f64::INFINITY,
                psi_length: 0.0,
                pass: false,
                error: Some(err.to_string()),
            },
        };
        edges.push(entry);
    }
    let max_deviation = edges.iter().map(|e| e.deviation).fold(0.0, f64::max);
    let pass = !edges.is_empty() && edges.iter().all(|e| e.pass);
    StraighteningReport {
        tol,
        edges,
        max_deviation,
        pass,
    }
}

// ---------------------------------------------------------------------------
// densities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Side offset along the normal; shrunk near roots.
    pub offset: f64,
    pub samples_per_edge: usize,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            offset: 1e-3,
            samples_per_edge: 200,
        }
    }
}

/// Picks the sheet of the limit Cauchy transform near the forest by
/// comparison with the Cauchy transform of the cloud at a safe distance.
struct SheetSelector<'a> {
    b: &'a AlgebraicBranch,
    weights: Vec<(Complex64, f64)>,
    reach: f64,
    lines: Vec<Vec<Complex64>>,
}

impl<'a> SheetSelector<'a> {
    fn new(f: &SupportForest, b: &'a AlgebraicBranch) -> Self {
        let mut weights: Vec<(Complex64, f64)> = Vec::new();
        if f.cloud.is_empty() {
            let total: f64 = f.edges.iter().map(Edge::length).sum();
            for e in &f.edges {
                for s in e.polyline.windows(2) {
                    weights.push(((s[0] + s[1]) * 0.5, (s[1] - s[0]).norm() / total));
                }
            }
        } else {
            let w = 1.0 / f.cloud.len() as f64;
            weights = f.cloud.iter().map(|&z| (z, w)).collect();
        }
        let pts: Vec<Complex64> = weights.iter().map(|p| p.0).collect();
        let spacing = median(
            pts.iter()
                .enumerate()
                .map(|(i, p)| {
                    pts.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, q)| (p - q).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .filter(|d| d.is_finite())
                .collect(),
        )
        .unwrap_or(0.01);
        SheetSelector {
            b,
            weights,
            reach: (4.0 * spacing).max(0.02),
            lines: f
                .edges
                .iter()
                .filter(|e| !e.exceptional)
                .map(|e| e.polyline.clone())
                .collect(),
        }
    }

    /// Distance along the ray from `x` to the first forest crossing beyond
    /// `skip`, capped at `reach`.
    fn clear_reach(&self, x: Complex64, dir: Complex64, skip: f64) -> f64 {
        let far = x + dir * self.reach;
        let mut t_hit = self.reach;
        for line in &self.lines {
            for seg in line.windows(2) {
                if let Some(p) = segments_cross(x, far, seg[0], seg[1]) {
                    let t = (p - x).norm();
                    if t > skip {
                        t_hit = t_hit.min(t);
                    }
                }
            }
        }
        if t_hit < self.reach {
            0.5 * t_hit
        } else {
            self.reach
        }
    }

    fn cauchy(&self, z: Complex64) -> Complex64 {
        self.weights.iter().map(|(p, w)| *w / (z - p)).sum()
    }

    /// Branch value at `x + t * normal` for each requested `t` (same sign),
    /// continued inward from distance `reach`.
    fn side_values(&self, x: Complex64, normal: Complex64, ts: &[f64]) -> Result<Vec<Complex64>> {
        let skip = 2.0 * ts.iter().copied().fold(0.0, f64::max);
        let far = x + normal * self.clear_reach(x, normal, skip).max(skip);
        let mut w = self.b.nearest_root(far, self.cauchy(far));
        let mut z = far;
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            let zn = x + normal * t;
            w = self.b.continue_segment(z, w, zn, 0)?;
            z = zn;
            out.push(w);
        }
        Ok(out)
    }
}

/// Jump of the limit Cauchy transform across the forest; fills per-edge
/// density samples, edge masses and atom masses.
pub fn plemelj_density(
    f: &SupportForest,
    b: &AlgebraicBranch,
    params: &DensityParams,
) -> SupportForest {
    let mut out = f.clone();
    let sel = SheetSelector::new(f, b);
    let n = params.samples_per_edge.max(2);
    for e in out.edges.iter_mut().filter(|e| !e.exceptional) {
        let len = e.length();
        e.density.clear();
        e.skipped = 0;
        e.mass = 0.0;
        if len == 0.0 {
            continue;
        }
        for i in 0..n {
            // cosine grading resolves the inverse-root growth at endpoints
            let t = (i as f64 + 0.5) / n as f64;
            let s = 0.5 * len * (1.0 - (PI * t).cos());
            let ds = 0.5 * len * PI * (PI * t).sin() / n as f64;
            let (x, tangent) = e.point_at(s);
            let normal = tangent * I;
            let delta = params.offset.min(0.05 * b.singular_distance(x));
            if delta < PATH_STANDOFF || 2.0 * delta > sel.reach {
                e.skipped += 1;
                continue;
            }
            let sides = sel
                .side_values(x, normal, &[2.0 * delta, delta])
                .and_then(|p| Ok((p, sel.side_values(x, -normal, &[2.0 * delta, delta])?)));
            let (plus, minus) = match sides {
                Ok(v) => v,
                Err(_) => {
                    e.skipped += 1;
                    continue;
                }
            };
            // first-order Richardson extrapolation of the jump to the edge
            let jump = (plus[1] - minus[1]) * 2.0 - (plus[0] - minus[0]);
            let rho = jump.norm() / (2.0 * PI);
            e.mass += rho * ds;
            e.density.push(DensitySample { s, z: x, rho });
        }
    }
    for v in out.vertices.iter_mut().filter(|v| v.kind == VertexKind::Atom) {
        v.mass = atom_mass(b, v.z);
    }
    out
}

/// `|(Vt(a) / Qt~(a))^{1/k}|` with `Qt = (z - a)^k Qt~`.
pub fn atom_mass(b: &AlgebraicBranch, a: Complex64) -> f64 {
    let mut rest = Complex64::new(1.0, 0.0);
    for q in &b.q_roots {
        if (q.z - a).norm() > MERGE_TOL * (1.0 + a.norm()) {
            rest *= (a - q.z).powu(q.multiplicity as u32);
        }
    }
    (b.vt.eval(a) / rest).norm().powf(1.0 / b.k as f64)
}

// ---------------------------------------------------------------------------
// extended support, trees and census

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalTrace {
    pub root: Complex64,
    pub direction: Complex64,
    pub termination: Termination,
    pub length: f64,
    /// Whether the trace was added as an exceptional edge.
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedReport {
    pub traces: Vec<ExceptionalTrace>,
    /// Traces that neither hit the forest nor ended at a root.
    pub non_terminating: usize,
}

#[derive(Debug, Clone)]
pub struct ExtendedParams {
    /// Distance from the root at which traces start.
    pub seed_radius: f64,
    pub trace: TraceParams,
}

impl Default for ExtendedParams {
    fn default() -> Self {
        ExtendedParams {
            seed_radius: 1e-3,
            trace: TraceParams {
                barrier_radius: 1e-3,
                ..TraceParams::default()
            },
        }
    }
}

/// Adds the exceptional trajectories: gradient lines of the potential that
/// end at a root of `Vt`, traced backwards from the root until they reach
/// the forest.
///
/// Only directions consistent with the sheet of the limit Cauchy transform
/// are traced; directions running along an existing edge are skipped.
pub fn extended_support(
    f: &SupportForest,
    b: &AlgebraicBranch,
    params: &ExtendedParams,
) -> Result<(SupportForest, ExtendedReport)> {
    let mut out = f.clone();
    let sel = SheetSelector::new(f, b);
    let mut traces = Vec::new();
    let mut non_terminating = 0;
    let mut barriers: Vec<Vec<Complex64>> = f
        .edges
        .iter()
        .filter(|e| !e.exceptional)
        .map(|e| e.polyline.clone())
        .collect();
    let barrier_edges: Vec<usize> = (0..f.edges.len()).filter(|&i| !f.edges[i].exceptional).collect();
    let atom_ids: Vec<usize> = (0..f.vertices.len())
        .filter(|&v| f.vertices[v].kind == VertexKind::Atom)
        .collect();
    for &a in &atom_ids {
        barriers.push(vec![f.vertices[a].z]);
    }
    let eps = params.seed_radius;
    for root in b.v_roots.clone() {
        for dir in descending_directions(b, &root) {
            let seed = root.z + dir * eps;
            if f.distance_to(seed) < 0.5 * eps {
                continue;
            }
            // sheet of the Cauchy transform on this ray
            let w = match sel.side_values(root.z, dir, &[eps]) {
                Ok(v) => v[0],
                Err(_) => continue,
            };
            let g = w * dir;
            if (g.arg().abs() - PI).abs() > 0.5 * PI / b.k as f64 {
                continue;
            }
            let mut tp = params.trace.clone();
            tp.barriers = barriers.clone();
            tp.barrier_exclusion = 3.0 * eps;
            let tr = match trace_trajectory(b, seed, w, dir, &tp) {
                Ok(t) => t,
                Err(_) => {
                    non_terminating += 1;
                    continue;
                }
            };
            let mut attached = false;
            let target = match tr.termination {
                Termination::Barrier { barrier, point } => {
                    if barrier < barrier_edges.len() {
                        Some((point, None))
                    } else {
                        Some((point, Some(atom_ids[barrier - barrier_edges.len()])))
                    }
                }
                Termination::Root { kind, index } => {
                    let z = match kind {
                        RootKind::V => b.v_roots[index].z,
                        RootKind::Q => b.q_roots[index].z,
                    };
                    (f.distance_to(z) <= params.trace.barrier_radius.max(1e-6)).then_some((z, None))
                }
                _ => None,
            };
            if let Some((point, vertex)) = target {
                let from = vertex_at(&mut out, root.z, VertexKind::VZero, root.multiplicity);
                let to = match vertex {
                    Some(v) => v,
                    None => vertex_at(&mut out, point, VertexKind::Junction, 0),
                };
                let mut poly = vec![root.z];
                poly.extend_from_slice(&tr.points);
                let mut edge = Edge::new(from, to, poly);
                edge.exceptional = true;
                out.edges.push(edge);
                attached = true;
            } else {
                non_terminating += 1;
            }
            traces.push(ExceptionalTrace {
                root: root.z,
                direction: dir,
                termination: tr.termination,
                length: tr.length,
                attached,
            });
        }
    }
    Ok((
        out,
        ExtendedReport {
            traces,
            non_terminating,
        },
    ))
}

/// Index of the vertex at `z`, splitting the edge through `z` or creating
/// an isolated vertex when there is none.
fn vertex_at(f: &mut SupportForest, z: Complex64, kind: VertexKind, multiplicity: usize) -> usize {
    if let Some(i) = f.vertices.iter().position(|v| (v.z - z).norm() <= 1e-9) {
        return i;
    }
    let id = f.vertices.len();
    f.vertices.push(Vertex {
        z,
        kind,
        multiplicity,
        mass: 0.0,
    });
    // split the closest plain edge at its closest segment
    let best = f
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.exceptional && e.polyline.len() >= 2)
        .map(|(i, e)| (i, e.distance(z)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((ei, d)) = best {
        if d <= 1e-2 {
            let e = f.edges[ei].clone();
            let seg = e
                .polyline
                .windows(2)
                .enumerate()
                .map(|(i, s)| (i, segment_distance(z, s[0], s[1])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|p| p.0)
                .unwrap_or(0);
            let mut left: Vec<Complex64> = e.polyline[..=seg].to_vec();
            left.push(z);
            let mut right = vec![z];
            right.extend_from_slice(&e.polyline[seg + 1..]);
            let frac = {
                let l: f64 = left.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
                l / e.length().max(f64::MIN_POSITIVE)
            };
            let mut a = Edge::new(e.from, id, left);
            let mut c = Edge::new(id, e.to, right);
            a.mass = e.mass * frac;
            c.mass = e.mass * (1.0 - frac);
            f.edges[ei] = a;
            f.edges.push(c);
        }
    }
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub vertices: usize,
    pub edges: usize,
    pub components: usize,
    /// Number of independent cycles, `E - V + C`.
    pub cycle_rank: usize,
    pub connected: bool,
    pub acyclic: bool,
    pub pass: bool,
}

/// Connectivity and acyclicity of the forest including exceptional edges.
pub fn verify_tree(f: &SupportForest) -> TreeReport {
    let comps = f.components(true).len();
    let v = f.vertices.len();
    let e = f.edges.len();
    let cycle_rank = (e + comps).saturating_sub(v);
    let connected = comps == 1;
    let acyclic = cycle_rank == 0;
    TreeReport {
        vertices: v,
        edges: e,
        components: comps,
        cycle_rank,
        connected,
        acyclic,
        pass: connected && acyclic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCensus {
    pub vertices: Vec<usize>,
    pub q_roots: usize,
    pub v_roots: usize,
    pub difference: i64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub k: usize,
    pub components: Vec<ComponentCensus>,
    /// Leaves that are not roots.
    pub unclassified_leaves: Vec<usize>,
    pub pass: bool,
}

/// Per component of the plain forest, `#Q-roots - #V-roots` (with
/// multiplicity) must be 0 or `k`. Each root counts for the nearest
/// component within the snap radius, which grows with the spacing of the
/// cloud near the root as for leaves.
pub fn component_census(f: &SupportForest, b: &AlgebraicBranch, params: &ForestParams) -> CensusReport {
    let comps = f.components(false);
    // points absorbed by atoms do not set a spacing
    let loose: Vec<Complex64> = f
        .cloud
        .iter()
        .copied()
        .filter(|p| {
            f.vertices
                .iter()
                .filter(|v| v.kind == VertexKind::Atom)
                .all(|v| (v.z - p).norm() > params.snap)
        })
        .collect();
    let spacing = |z: Complex64| -> f64 {
        let nearest = loose
            .iter()
            .min_by(|a, c| (*a - z).norm().total_cmp(&(*c - z).norm()));
        match nearest {
            Some(&p) => loose
                .iter()
                .filter(|&&q| q != p)
                .map(|q| (q - p).norm())
                .fold(f64::INFINITY, f64::min),
            None => 0.0,
        }
    };
    let mut q = vec![0usize; comps.len()];
    let mut v = vec![0usize; comps.len()];
    for (kind, _, r) in b.singular_points() {
        let best = comps
            .iter()
            .enumerate()
            .map(|(i, c)| (i, f.component_distance(c, r.z, false)))
            .min_by(|a, c| a.1.total_cmp(&c.1));
        if let Some((i, d)) = best {
            let radius = params.snap.max(params.snap_spacing * spacing(r.z).min(1e300));
            if d <= radius {
                match kind {
                    RootKind::Q => q[i] += r.multiplicity,
                    RootKind::V => v[i] += r.multiplicity,
                }
            }
        }
    }
    let components: Vec<ComponentCensus> = comps
        .into_iter()
        .enumerate()
        .map(|(i, vertices)| {
            let difference = q[i] as i64 - v[i] as i64;
            ComponentCensus {
                vertices,
                q_roots: q[i],
                v_roots: v[i],
                difference,
                pass: q[i] + v[i] > 0 && (difference == 0 || difference == b.k as i64),
            }
        })
        .collect();
    let unclassified_leaves = f.unclassified_leaves();
    let pass = !components.is_empty() && components.iter().all(|c| c.pass);
    CensusReport {
        k: b.k,
        components,
        unclassified_leaves,
        pass,
    }
}

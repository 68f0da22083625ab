//! Root-counting measures, Cauchy transforms, logarithmic potentials and
//! probe comparisons against the algebraic limit law `C^k = V/Q`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{ConvexHull, Poly};

const ON_SUPPORT: f64 = 1e-12;

/// Finite probability measure given by weighted atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootMeasure {
    atoms: Vec<(Complex64, f64)>,
}

impl RootMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if atoms.iter().any(|(_, w)| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Invalid("atom weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("atom weights sum to {total}, not 1")));
        }
        Ok(RootMeasure { atoms })
    }

    /// Uniform weight on each point, repeated points counting with multiplicity.
    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let w = 1.0 / roots.len() as f64;
        Ok(RootMeasure {
            atoms: roots.iter().map(|&z| (z, w)).collect(),
        })
    }

    pub fn from_poly(p: &Poly) -> Result<Self> {
        Self::from_roots(&p.roots()?)
    }

    pub fn atoms(&self) -> &[(Complex64, f64)] {
        &self.atoms
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.atoms.iter().map(|(z, _)| *z).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    fn check_off_support(&self, z: Complex64) -> Result<()> {
        if self.atoms.iter().any(|(a, _)| (z - a).norm() < ON_SUPPORT) {
            Err(Error::OnSupport { z })
        } else {
            Ok(())
        }
    }

    /// `Σ w_j / (z - ζ_j)`
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        self.check_off_support(z)?;
        Ok(self.atoms.iter().map(|(a, w)| (z - a).inv() * *w).sum())
    }

    /// `Σ w_j log|z - ζ_j|`
    pub fn potential(&self, z: Complex64) -> Result<f64> {
        self.check_off_support(z)?;
        Ok(self.atoms.iter().map(|(a, w)| w * (z - a).norm().ln()).sum())
    }
}

/// Cauchy transform of the root-counting measure of `p`, evaluated as
/// `p'(z) / (deg p · p(z))` without computing roots.
pub fn cauchy_of_poly(p: &Poly, z: Complex64) -> Result<Complex64> {
    let n = p.degree().ok_or(Error::ZeroPolynomial)?;
    if n == 0 {
        return Err(Error::DegreeTooSmall { degree: 0, needed: 1 });
    }
    let (v, dv) = p.eval_with_derivative(z);
    if v.norm() <= ON_SUPPORT * p.eval_abs_scale(z) {
        return Err(Error::OnSupport { z });
    }
    Ok(dv / (v * n as f64))
}

/// Points farther than `eps` from the convex hull of a polynomial's roots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HullReport {
    pub eps: f64,
    pub max_distance: f64,
    pub pass: bool,
    pub violators: Vec<(Complex64, f64)>,
}

pub fn hull_check(points: &[Complex64], hull_source: &Poly, eps: f64) -> Result<HullReport> {
    let hull = ConvexHull::new(&hull_source.roots()?)?;
    Ok(hull_check_against(points, &hull, eps))
}

pub fn hull_check_against(points: &[Complex64], hull: &ConvexHull, eps: f64) -> HullReport {
    let mut max_distance: f64 = 0.0;
    let mut violators = Vec::new();
    for &z in points {
        let d = hull.distance(z);
        max_distance = max_distance.max(d);
        if d > eps {
            violators.push((z, d));
        }
    }
    HullReport {
        eps,
        max_distance,
        pass: violators.is_empty(),
        violators,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub z: Complex64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_error: f64,
    /// `|lhs| / |rhs|`, branch-free form of the comparison.
    pub modulus_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n: usize,
    pub probes: Vec<Probe>,
    pub max_error: f64,
    pub median_error: f64,
}

impl ProbeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_re,z_im,lhs_re,lhs_im,rhs_re,rhs_im,abs_err\n");
        for p in &self.probes {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                p.z.re, p.z.im, p.lhs.re, p.lhs.im, p.rhs.re, p.rhs.im, p.abs_error
            ));
        }
        out
    }
}

pub const DEFAULT_STANDOFF: f64 = 0.5;
pub const DEFAULT_PROBE_COUNT: usize = 16;

/// `count` points on the circle `|z - center| = radius`.
pub fn circle_probes(center: Complex64, radius: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|j| center + Complex64::from_polar(radius, std::f64::consts::TAU * (j as f64 + 0.5) / count as f64))
        .collect()
}

/// Sixteen probes on the circle of radius `max|root of Q_k| + 1.5`.
pub fn default_probes(qk: &Poly) -> Result<Vec<Complex64>> {
    let rmax = qk.roots()?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(circle_probes(Complex64::new(0.0, 0.0), rmax + 1.5, DEFAULT_PROBE_COUNT))
}

/// Compares `cauchy(mu, z)^k` with `Vt(z) / monic(Qk)(z)` at each probe.
pub fn probe_compare(
    mu: &RootMeasure,
    vt: &Poly,
    qk: &Poly,
    k: usize,
    probes: &[Complex64],
    standoff: f64,
) -> Result<ProbeReport> {
    let qt = qk.monic()?;
    let hull = ConvexHull::new(&qt.roots()?)?;
    let mut out = Vec::with_capacity(probes.len());
    for &z in probes {
        let distance = hull.distance(z);
        if distance < standoff {
            return Err(Error::ProbeTooClose { z, distance, standoff });
        }
        let lhs = mu.cauchy(z)?.powu(k as u32);
        let rhs = vt.eval(z) / qt.eval(z);
        out.push(Probe {
            z,
            lhs,
            rhs,
            abs_error: (lhs - rhs).norm(),
            modulus_ratio: lhs.norm() / rhs.norm(),
        });
    }
    let mut errors: Vec<f64> = out.iter().map(|p| p.abs_error).collect();
    errors.sort_by(f64::total_cmp);
    let max_error = errors.last().copied().unwrap_or(0.0);
    let median_error = median_sorted(&errors);
    Ok(ProbeReport {
        n: mu.atoms.len(),
        probes: out,
        max_error,
        median_error,
    })
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        len if len % 2 == 1 => sorted[len / 2],
        len => 0.5 * (sorted[len / 2 - 1] + sorted[len / 2]),
    }
}

/// `max |C_{p'}(z) - C_p(z)|` over the probes: root measures of a polynomial
/// and of its derivative seen from outside the roots.
pub fn derivative_transform_gap(p: &Poly, probes: &[Complex64]) -> Result<f64> {
    let n = p.degree().ok_or(Error::ZeroPolynomial)?;
    if n < 2 {
        return Err(Error::DegreeTooSmall { degree: n, needed: 2 });
    }
    let roots = match p.roots() {
        Ok(r) => r,
        Err(Error::RootsNotConverged { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let hull = ConvexHull::new(&roots)?;
    let dp = p.derivative();
    let mut gap: f64 = 0.0;
    for &z in probes {
        let distance = hull.distance(z);
        if distance < DEFAULT_STANDOFF {
            return Err(Error::ProbeTooClose {
                z,
                distance,
                standoff: DEFAULT_STANDOFF,
            });
        }
        gap = gap.max((cauchy_of_poly(&dp, z)? - cauchy_of_poly(p, z)?).norm());
    }
    Ok(gap)
}

//! Acceptance suite. Every criterion is checked against an oracle written
//! here, independent of the library code under test, and prints one
//! pass/fail line. Criterion 10 is report-only.

use std::time::Instant;

use lame_core::forest::{
    build_from_roots, component_census, extended_support, plemelj_density, verify_straightening, AlgebraicBranch,
    DensityParams, ExtendedParams, ForestParams, SupportForest,
};
use lame_core::linalg::{eigenvalues, ComplexMatrix};
use lame_core::operator::LameOperator;
use lame_core::poly::Poly;
use lame_core::spectral::{enumerate, select_sequence, SpectralPair};
use lame_spectra::config::{ExperimentConfig, Task};
use lame_spectra::figures::{figure_interlacing, figure_observations, figure_vanvleck_cloud};
use lame_spectra::manifest::Recorder;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------------------
// oracles

/// Coefficients (ascending) of a product of linear factors.
fn expand(roots: &[C]) -> Vec<C> {
    let mut p = vec![c(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![c(0.0, 0.0); p.len() + 1];
        for (i, &a) in p.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        p = next;
    }
    p
}

fn convolve(a: &[C], b: &[C]) -> Vec<C> {
    let mut out = vec![c(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn differentiate(a: &[C], times: usize) -> Vec<C> {
    let mut p = a.to_vec();
    for _ in 0..times {
        p = p.iter().enumerate().skip(1).map(|(i, x)| x * i as f64).collect();
    }
    p
}

fn horner(a: &[C], z: C) -> C {
    a.iter().rev().fold(c(0.0, 0.0), |acc, x| acc * z + x)
}

fn coeffs(p: &Poly, len: usize) -> Vec<C> {
    (0..len).map(|i| p.coeff(i)).collect()
}

fn max_rel_diff(a: &[C], b: &[C]) -> f64 {
    let scale = b.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let n = a.len().max(b.len());
    let get = |v: &[C], i: usize| v.get(i).copied().unwrap_or_default();
    (0..n).map(|i| (get(a, i) - get(b, i)).norm()).fold(0.0, f64::max) / scale
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// `z^m (z - 1)^(n - m)` through the binomial theorem.
fn k1_stieltjes(m: usize, n: usize) -> Vec<C> {
    let mut out = vec![c(0.0, 0.0); n + 1];
    let l = n - m;
    for j in 0..=l {
        let sign = if (l - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        out[m + j] = c(sign * binomial(l, j), 0.0);
    }
    out
}

/// Convex hull by the monotone chain, counterclockwise.
fn hull(points: &[C]) -> Vec<C> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
    if p.len() < 3 {
        return p;
    }
    let cross = |o: C, a: C, b: C| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut lower: Vec<C> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<C> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn seg_dist(z: C, a: C, b: C) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() == 0.0 {
        0.0
    } else {
        (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0)
    };
    (z - a - d * t).norm()
}

/// Distance from `z` to the hull (zero inside).
fn hull_dist(h: &[C], z: C) -> f64 {
    match h.len() {
        0 => f64::INFINITY,
        1 => (z - h[0]).norm(),
        2 => seg_dist(z, h[0], h[1]),
        n => {
            let inside = (0..n).all(|i| {
                let (a, b) = (h[i], h[(i + 1) % n]);
                (b - a).re * (z - a).im - (b - a).im * (z - a).re >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..n).map(|i| seg_dist(z, h[i], h[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Greedy nearest matching distance between two equal-size sets.
fn matched(a: &[C], b: &[C]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Legendre nodes: eigenvalues of the Jacobi matrix by Sturm-sequence
/// bisection.
fn legendre_nodes_sturm(n: usize) -> Vec<f64> {
    let beta2: Vec<f64> = (1..n).map(|i| (i * i) as f64 / (4 * i * i - 1) as f64).collect();
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = -x;
        if q < 0.0 {
            count += 1;
        }
        for b2 in &beta2 {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = -x - b2 / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn cauchy(points: &[C], z: C) -> C {
    points.iter().map(|p| 1.0 / (z - p)).sum::<C>() / points.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Components and cycle rank of a forest by union-find.
fn union_find_shape(f: &SupportForest) -> (usize, usize) {
    let n = f.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut cycles = 0;
    for e in &f.edges {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if a == b {
            cycles += 1;
        } else {
            parent[a] = b;
        }
    }
    let comps = (0..n).filter(|&v| find(&mut parent, v) == v).count();
    (comps, cycles)
}

// ---------------------------------------------------------------------------
// operators

fn k1_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, -1.0, 1.0])]).unwrap()
}

fn k2_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::from_real(&[0.0, -1.0, 0.0, 1.0])]).unwrap()
}

fn legendre_operator() -> LameOperator {
    LameOperator::new(vec![Poly::zero(), Poly::from_real(&[0.0, 2.0]), Poly::from_real(&[-1.0, 0.0, 1.0])]).unwrap()
}

fn quartic_roots() -> Vec<C> {
    vec![c(0.0, 1.0), c(0.0, -1.0), c(2.0, 3.0), c(3.0, -2.0)]
}

fn quartic_operator() -> LameOperator {
    LameOperator::from_composition(3, &Poly::from_roots(&quartic_roots())).unwrap()
}

fn cubic_monomial_operator() -> LameOperator {
    let q = Poly::from_roots(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]);
    LameOperator::new(vec![Poly::zero(), Poly::zero(), Poly::zero(), q]).unwrap()
}

fn quartic_target() -> Poly {
    Poly::from_roots(&[c(1.6, 2.0)])
}

/// Coefficient residual of `d^3/dz^3 (Q S) + V S`, computed from scratch.
fn quartic_residual(pair: &SpectralPair) -> f64 {
    let q = expand(&quartic_roots());
    let s = coeffs(&pair.s, pair.n + 1);
    let v = coeffs(&pair.v, 2);
    let ts = differentiate(&convolve(&q, &s), 3);
    let vs = convolve(&v, &s);
    let scale = ts.iter().chain(&vs).map(|x| x.norm()).fold(0.0, f64::max);
    let len = ts.len().max(vs.len());
    (0..len)
        .map(|i| (ts.get(i).copied().unwrap_or_default() + vs.get(i).copied().unwrap_or_default()).norm())
        .fold(0.0, f64::max)
        / scale
}

// ---------------------------------------------------------------------------
// criteria

struct Line {
    pass: bool,
    detail: String,
}

fn criterion1() -> Line {
    let op = k1_operator();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut counts = true;
    for n in 1..=25 {
        let rep = enumerate(&op, n).unwrap();
        counts &= rep.pairs.len() == n + 1;
        for (m, pair) in rep.pairs.iter().enumerate() {
            let v_exact = [c(m as f64, 0.0), c(-(n as f64), 0.0)];
            worst = worst
                .max(max_rel_diff(&coeffs(&pair.v, 2), &v_exact))
                .max(max_rel_diff(&coeffs(&pair.s, n + 1), &k1_stieltjes(m, n)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        pass: counts && worst <= 1e-10 && secs < 1.0,
        detail: format!("n+1 pairs for n=1..25: {counts}; max relative coefficient error {worst:.2e}; {secs:.3}s"),
    }
}

fn criterion2() -> Line {
    let rep = enumerate(&k2_operator(), 2).unwrap();
    // eliminating coefficients of (z^3 - z) S'' + (-2 z + b) S = 0 with S
    // monic quadratic gives b in {0, 2, -2}
    let expected: [(f64, [f64; 3]); 3] = [(-2.0, [0.0, -1.0, 1.0]), (0.0, [-1.0, 0.0, 1.0]), (2.0, [0.0, 1.0, 1.0])];
    let mut worst: f64 = 0.0;
    let mut matched_all = rep.pairs.len() == 3;
    for (b, s) in expected {
        let s: Vec<C> = s.iter().map(|&x| c(x, 0.0)).collect();
        let best = rep
            .pairs
            .iter()
            .map(|p| {
                max_rel_diff(&coeffs(&p.v, 2), &[c(b, 0.0), c(-2.0, 0.0)]).max(max_rel_diff(&coeffs(&p.s, 3), &s))
            })
            .fold(f64::INFINITY, f64::min);
        matched_all &= best.is_finite();
        worst = worst.max(best);
    }
    Line {
        pass: matched_all && worst <= 1e-10,
        detail: format!("{} pairs; max error against closed forms {worst:.2e}", rep.pairs.len()),
    }
}

fn criterion3() -> Line {
    let start = Instant::now();
    let rep = enumerate(&quartic_operator(), 39).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let res = rep.pairs.iter().map(quartic_residual).fold(0.0, f64::max);
    let degree_one = rep.pairs.iter().all(|p| p.v.degree() == Some(1));
    Line {
        pass: rep.pairs.len() == 40 && degree_one && res <= 1e-8 && secs < 30.0,
        detail: format!("{} linear Van Vlecks at n=39; max residual {res:.2e}; {secs:.2}s", rep.pairs.len()),
    }
}

fn criterion4() -> Line {
    let h = hull(&quartic_roots());
    let mut dists = Vec::new();
    for n in [20, 30, 39] {
        let rep = enumerate(&quartic_operator(), n).unwrap();
        let mut d: f64 = 0.0;
        for p in &rep.pairs {
            for &z in &p.roots {
                d = d.max(hull_dist(&h, z));
            }
            // root of the linear Van Vleck polynomial
            let v0 = p.v.coeff(0);
            let v1 = p.v.coeff(1);
            d = d.max(hull_dist(&h, -v0 / v1));
        }
        dists.push(d);
    }
    let within = dists.iter().all(|&d| d <= 0.15);
    let monotone = dists.windows(2).all(|w| w[1] <= w[0] + 1e-3);
    Line {
        pass: within && monotone,
        detail: format!(
            "max distance to Conv(Q) for n=20,30,39: {:.3e}, {:.3e}, {:.3e}",
            dists[0], dists[1], dists[2]
        ),
    }
}

fn criterion5() -> (Line, SpectralPair) {
    let start = Instant::now();
    let pair = enumerate(&legendre_operator(), 200).unwrap().pairs.remove(0);
    let secs = start.elapsed().as_secs_f64();
    let mut probe_err: f64 = 0.0;
    for j in 0..16 {
        let z = C::from_polar(2.0, std::f64::consts::TAU * j as f64 / 16.0 + 0.1);
        let cn = cauchy(&pair.roots, z);
        probe_err = probe_err.max((cn * cn - 1.0 / (z * z - 1.0)).norm());
    }
    let nodes: Vec<C> = legendre_nodes_sturm(200).into_iter().map(|x| c(x, 0.0)).collect();
    let node_err = matched(&pair.roots, &nodes);
    (
        Line {
            pass: probe_err <= 1e-2 && node_err <= 1e-8 && secs < 10.0,
            detail: format!("|C^2 - 1/(z^2-1)| max {probe_err:.2e} on |z|=2; node error {node_err:.2e}; {secs:.2}s"),
        },
        pair,
    )
}

fn criterion6() -> Line {
    let q = expand(&quartic_roots());
    let pairs = select_sequence(&quartic_operator(), &quartic_target(), &[10, 20, 30, 40]).unwrap();
    let radius = quartic_roots().iter().map(|z| z.norm()).fold(0.0, f64::max) + 1.5;
    let mut medians = Vec::new();
    for p in &pairs {
        let v = coeffs(&p.v, 2);
        let errs = (0..16)
            .map(|j| {
                let z = C::from_polar(radius, std::f64::consts::TAU * (j as f64 + 0.5) / 16.0);
                let vt = z + v[0] / v[1];
                (cauchy(&p.roots, z).powu(3) - vt / horner(&q, z)).norm()
            })
            .collect();
        medians.push(median(errs));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    Line {
        pass: decreasing,
        detail: format!(
            "median |C^3 - Vt/Qt| for n=10,20,30,40: {:.3e}, {:.3e}, {:.3e}, {:.3e}",
            medians[0], medians[1], medians[2], medians[3]
        ),
    }
}

fn criterion7(legendre: &SpectralPair) -> Line {
    let b = AlgebraicBranch::new(&Poly::one(), &Poly::from_real(&[-1.0, 0.0, 1.0]), 2).unwrap();
    let f = build_from_roots(&legendre.roots, Some(&b), &ForestParams::default()).unwrap();
    let d = plemelj_density(&f, &b, &DensityParams::default());
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for e in &d.edges {
        for s in e.density.iter().filter(|s| s.z.re.abs() <= 0.9) {
            let arcsine = 1.0 / (std::f64::consts::PI * (1.0 - s.z.re * s.z.re).sqrt());
            worst = worst.max((s.rho - arcsine).abs());
            samples += 1;
        }
    }
    let mass = d.total_mass();
    Line {
        pass: samples > 0 && worst <= 1e-3 && (mass - 1.0).abs() <= 1e-3,
        detail: format!("{samples} samples with |x|<=0.9: max |rho - arcsine| {worst:.2e}; mass {mass:.6}"),
    }
}

fn criterion8() -> Line {
    let start = Instant::now();
    let pair = select_sequence(&quartic_operator(), &quartic_target(), &[60]).unwrap().remove(0);
    let q_roots = quartic_roots();
    let vt = Poly::from_roots(&[-pair.v.coeff(0) / pair.v.coeff(1)]);
    let b = AlgebraicBranch::new(&vt, &Poly::from_roots(&q_roots), 3).unwrap();
    let params = ForestParams::default();
    let f = match build_from_roots(&pair.roots, Some(&b), &params) {
        Ok(f) => f,
        Err(e) => {
            return Line {
                pass: false,
                detail: format!("build_from_roots failed: {e}"),
            }
        }
    };
    let straight = verify_straightening(&f, &b, 0.05);
    // every leaf must sit on a root of Q or V
    let v_root = -pair.v.coeff(0) / pair.v.coeff(1);
    let leaves_ok = (0..f.vertices.len())
        .filter(|&v| f.edges.iter().filter(|e| e.from == v || e.to == v).count() == 1)
        .all(|v| {
            let z = f.vertices[v].z;
            q_roots.iter().chain(std::iter::once(&v_root)).any(|r| (z - r).norm() < 1e-9)
        });
    let census = component_census(&f, &b, &params);
    let diffs_ok = census.components.iter().all(|c| c.difference == 0 || c.difference == 3);
    let (ext, _) = extended_support(&f, &b, &ExtendedParams::default()).unwrap();
    let (comps, cycles) = union_find_shape(&ext);
    let secs = start.elapsed().as_secs_f64();
    let diffs: Vec<i64> = census.components.iter().map(|c| c.difference).collect();
    Line {
        pass: straight.pass && leaves_ok && diffs_ok && comps == 1 && cycles == 0 && secs < 60.0,
        detail: format!(
            "straightening {:.2e} (tol 0.05); leaves at roots {leaves_ok}; census {diffs:?}; extended support {comps} component(s), {cycles} cycle(s); {secs:.1}s",
            straight.max_deviation
        ),
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, degree: usize) -> Vec<C> {
    let mut a: Vec<C> = (0..=degree)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    if a[degree].norm() < 0.1 {
        a[degree] = c(1.0, 0.0);
    }
    a
}

fn criterion9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut eig_err, mut trace_err, mut det_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let d = rng.gen_range(1..=30);
        let a = random_coeffs(&mut rng, d);
        let p = Poly::new(a.clone());
        let eig = eigenvalues(&ComplexMatrix::companion(&p).unwrap()).unwrap();
        let roots = p.roots().unwrap();
        let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
        eig_err = eig_err.max(matched(&eig, &roots) / scale);
        // Vieta: sum of roots and product of roots
        let sum: C = eig.iter().sum();
        let prod: C = eig.iter().product();
        let vieta_sum = -a[d - 1] / a[d];
        let vieta_prod = if d % 2 == 0 { a[0] / a[d] } else { -a[0] / a[d] };
        trace_err = trace_err.max((sum - vieta_sum).norm() / (1.0 + vieta_sum.norm()));
        det_err = det_err.max((prod - vieta_prod).norm() / (1.0 + vieta_prod.norm()));
    }
    let mut gl: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(2..=30);
        let p = Poly::new(random_coeffs(&mut rng, d));
        let roots = p.roots().unwrap();
        let h = hull(&roots);
        let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for z in p.derivative().roots().unwrap() {
            gl = gl.max(hull_dist(&h, z) / scale);
        }
    }
    Line {
        pass: eig_err <= 1e-8 && trace_err <= 1e-8 && det_err <= 1e-8 && gl <= 1e-9,
        detail: format!(
            "companion eigenvalues vs roots {eig_err:.2e}; trace {trace_err:.2e}; det {det_err:.2e}; Gauss-Lucas excess {gl:.2e}"
        ),
    }
}

fn criterion10() -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = Recorder::new(dir.path()).unwrap();
    let mut notes = Vec::new();
    let mut cfg = ExperimentConfig::new(cubic_monomial_operator(), Task::Figures);
    cfg.n = Some(40);
    match figure_interlacing(&cfg, &mut rec) {
        Ok(r) => notes.push(format!("cubic monomial operator n=40/41 alternation {:.1}%", r.alternation.unwrap_or(0.0))),
        Err(e) => notes.push(format!("monomial interlacing error: {e}")),
    }
    cfg.operator = legendre_operator();
    cfg.n = Some(20);
    match figure_interlacing(&cfg, &mut rec) {
        Ok(r) => notes.push(format!("Legendre n=20/21 alternation {:.1}%", r.alternation.unwrap_or(0.0))),
        Err(e) => notes.push(format!("Legendre interlacing error: {e}")),
    }
    cfg.operator = quartic_operator();
    cfg.n = Some(39);
    cfg.n_list = Some(vec![10, 20, 30, 39]);
    match figure_vanvleck_cloud(&cfg, &mut rec) {
        Ok(r) => notes.push(format!("Van Vleck histogram L1 {:.3?}", r.l1)),
        Err(e) => notes.push(format!("cloud error: {e}")),
    }
    let rep = enumerate(&cfg.operator, 39).unwrap();
    match figure_observations(&cfg, &mut rec, &rep) {
        Ok(()) => {
            let emitted = ["observation1.svg", "observation1.csv", "observation2.svg", "observation2.csv"]
                .iter()
                .all(|f| std::fs::metadata(dir.path().join(f)).map(|m| m.len() > 0).unwrap_or(false));
            notes.push(format!("observation overlays emitted: {emitted}"));
        }
        Err(e) => notes.push(format!("observation error: {e}")),
    }
    notes.join("; ")
}

fn main() {
    // the runner passes filter arguments; this suite always runs whole
    let mut failures = 0;
    let mut report = |id: usize, line: Line| {
        println!("criterion {id:2}: {} {}", if line.pass { "PASS" } else { "FAIL" }, line.detail);
        if !line.pass {
            failures += 1;
        }
    };
    report(1, criterion1());
    report(2, criterion2());
    report(3, criterion3());
    report(4, criterion4());
    let (line, legendre) = criterion5();
    report(5, line);
    report(6, criterion6());
    report(7, criterion7(&legendre));
    report(8, criterion8());
    report(9, criterion9());
    println!("criterion 10: REPORT {}", criterion10());
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all hard criteria pass");
}

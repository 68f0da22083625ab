use std::fmt::Write as _;

use lame_core::forest::{build_from_roots, SupportForest, MIN_FOREST_POINTS};
use lame_core::operator::LameOperator;
use lame_core::poly::Poly;
use lame_core::spectral::{enumerate_seeded, SpectrumReport};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use crate::svg::{points_csv, Figure, Panel};
use crate::tasks::{branch_for, draw_forest, fuchs, leading_hull, pick_pairs, with_pool};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Union of the Van Vleck zeros of every pair.
pub fn van_vleck_zeros(rep: &SpectrumReport) -> Vec<Complex64> {
    rep.pairs.iter().flat_map(|p| p.van_vleck_roots()).collect()
}

pub fn stieltjes_zeros(rep: &SpectrumReport) -> Vec<Complex64> {
    rep.pairs.iter().flat_map(|p| p.roots.iter().copied()).collect()
}

/// Scatter of all Van Vleck zeros together with the roots of `Q_k`.
pub fn figure_union(rec: &mut Recorder, op: &LameOperator, rep: &SpectrumReport) -> CliResult<()> {
    let (_, q_roots, _) = leading_hull(op)?;
    let zeros = van_vleck_zeros(rep);
    let mut panel = Panel::new(format!("Van Vleck zeros, n = {}", rep.n));
    panel.points(&q_roots, 3.5, "black").points(&zeros, 2.0, "#d62728");
    rec.write("fig1.svg", &Figure::single(panel, 480.0).render())?;
    rec.write("fig1.csv", &points_csv(&[("van_vleck", &zeros), ("q", &q_roots)]))?;
    rec.check(
        "fig1_count",
        zeros.len() == rep.pairs.len() * fuchs(op) && rep.found_count as u64 == rep.expected_count,
        format!("{} Van Vleck zeros from {} pairs", zeros.len(), rep.pairs.len()),
    );
    Ok(())
}

/// One panel per pair: small dots for the Stieltjes roots, medium ones for
/// the roots of `Q_k`, large ones for the Van Vleck roots.
pub fn figure_grid(rec: &mut Recorder, op: &LameOperator, rep: &SpectrumReport) -> CliResult<()> {
    let (_, q_roots, _) = leading_hull(op)?;
    let mut panels = Vec::new();
    let mut csv = String::from("pair,series,x,y\n");
    for (i, pair) in rep.pairs.iter().enumerate() {
        let vv = pair.van_vleck_roots();
        let b = pair.b();
        let mut p = Panel::new(format!("#{i} b = {:.3}{:+.3}i", b.re, b.im));
        p.points(&pair.roots, 1.2, "#1f77b4")
            .points(&q_roots, 3.0, "black")
            .points(&vv, 5.0, "#d62728");
        panels.push(p);
        for (series, pts) in [("s", &pair.roots), ("q", &q_roots), ("v", &vv)] {
            for z in pts.iter() {
                let _ = writeln!(csv, "{i},{series},{:e},{:e}", z.re, z.im);
            }
        }
    }
    let cols = (panels.len() as f64).sqrt().ceil() as usize;
    rec.write("fig2.svg", &Figure::grid(panels, cols, 160.0).render())?;
    rec.write("fig2.csv", &csv)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeInterlacing {
    pub edge: usize,
    pub lower: usize,
    pub upper: usize,
    /// Percentage of neighbouring projected roots that come from different
    /// polynomials; `None` with fewer than two roots on the edge.
    pub alternation: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub n: usize,
    pub reference_n: usize,
    pub junction_radius: f64,
    pub edges: Vec<EdgeInterlacing>,
    /// Roots dropped inside junction disks.
    pub dropped: usize,
    pub projected: usize,
    pub alternation: Option<f64>,
}

/// Arc length and distance of the closest point of a polyline.
fn project(polyline: &[Complex64], z: Complex64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut base = 0.0;
    for seg in polyline.windows(2) {
        let d = seg[1] - seg[0];
        let len = d.norm();
        let t = if len == 0.0 {
            0.0
        } else {
            (((z - seg[0]) * d.conj()).re / (len * len)).clamp(0.0, 1.0)
        };
        let dist = (z - (seg[0] + d * t)).norm();
        if dist < best.1 {
            best = (base + t * len, dist);
        }
        base += len;
    }
    best
}

/// Projects both root sets onto the nearest plain edge, after removing the
/// disks around junctions, and counts alternations along each edge.
pub fn interlacing(f: &SupportForest, lower: &[Complex64], upper: &[Complex64], junction_radius: f64) -> (usize, Vec<Vec<(f64, bool)>>) {
    let junctions: Vec<Complex64> = (0..f.vertices.len())
        .filter(|&v| f.degree(v) >= 3)
        .map(|v| f.vertices[v].z)
        .collect();
    let plain: Vec<usize> = (0..f.edges.len()).filter(|&i| !f.edges[i].exceptional).collect();
    let mut per_edge: Vec<Vec<(f64, bool)>> = vec![Vec::new(); f.edges.len()];
    let mut dropped = 0;
    for (pts, is_upper) in [(lower, false), (upper, true)] {
        for &z in pts {
            if junctions.iter().any(|j| (z - j).norm() < junction_radius) {
                dropped += 1;
                continue;
            }
            let hit = plain
                .iter()
                .map(|&i| (i, project(&f.edges[i].polyline, z)))
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1));
            match hit {
                Some((i, (s, _))) => per_edge[i].push((s, is_upper)),
                None => dropped += 1,
            }
        }
    }
    for list in &mut per_edge {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    (dropped, per_edge)
}

fn alternation_report(n: usize, reference_n: usize, junction_radius: f64, dropped: usize, per_edge: &[Vec<(f64, bool)>]) -> InterlacingReport {
    let mut edges = Vec::new();
    let (mut alt, mut pairs, mut projected) = (0usize, 0usize, 0usize);
    for (i, list) in per_edge.iter().enumerate() {
        let a = list.windows(2).filter(|w| w[0].1 != w[1].1).count();
        let m = list.len().saturating_sub(1);
        alt += a;
        pairs += m;
        projected += list.len();
        edges.push(EdgeInterlacing {
            edge: i,
            lower: list.iter().filter(|p| !p.1).count(),
            upper: list.iter().filter(|p| p.1).count(),
            alternation: (m > 0).then(|| 100.0 * a as f64 / m as f64),
        });
    }
    InterlacingReport {
        n,
        reference_n,
        junction_radius,
        edges,
        dropped,
        projected,
        alternation: (pairs > 0).then(|| 100.0 * alt as f64 / pairs as f64),
    }
}

/// Interlacing of the roots of `S_n` and `S_{n+1}` along the support forest.
/// Report-only.
pub fn figure_interlacing(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<InterlacingReport> {
    let n = cfg.n.unwrap_or_default();
    let reference_n = cfg.reference_n.unwrap_or((n + 1).max(MIN_FOREST_POINTS));
    let mut degrees = vec![n, n + 1];
    if reference_n > n + 1 {
        degrees.push(reference_n);
    }
    let pairs = pick_pairs(cfg, &degrees)?;
    let reference = pairs.iter().find(|p| p.n == reference_n).unwrap_or(&pairs[1]);
    let b = branch_for(&cfg.operator, reference)?;
    let f = build_from_roots(&reference.roots, Some(&b), &cfg.forest.params())
        .map_err(|e| CliError::Failed(format!("forest unavailable for interlacing: {e}")))?;
    let (dropped, per_edge) = interlacing(&f, &pairs[0].roots, &pairs[1].roots, cfg.junction_radius);
    let report = alternation_report(n, reference_n, cfg.junction_radius, dropped, &per_edge);

    let mut panel = Panel::new(format!("S_{n} and S_{} along the support", n + 1));
    draw_forest(&mut panel, &f);
    for v in 0..f.vertices.len() {
        if f.degree(v) >= 3 {
            panel.disk(f.vertices[v].z, cfg.junction_radius, "#aaaaaa");
        }
    }
    panel.points(&pairs[0].roots, 2.0, "#1f77b4").points(&pairs[1].roots, 2.0, "#ff7f0e");
    let tag = format!("interlacing_n{n}");
    rec.write(&format!("{tag}.svg"), &Figure::single(panel, 520.0).render())?;
    rec.write(
        &format!("{tag}.csv"),
        &points_csv(&[("lower", &pairs[0].roots), ("upper", &pairs[1].roots)]),
    )?;
    rec.write_json(&format!("{tag}.json"), &report)?;
    rec.report(
        &format!("interlacing[n={n}]"),
        match report.alternation {
            Some(a) => format!("alternation {a:.1}% over {} projected roots, {} dropped", report.projected, report.dropped),
            None => format!("too few projected roots ({})", report.projected),
        },
    );
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudReport {
    pub n_list: Vec<usize>,
    pub counts: Vec<usize>,
    pub bins: usize,
    pub bounds: [f64; 4],
    /// L1 distances between the histograms of successive degrees.
    pub l1: Vec<f64>,
}

pub const CLOUD_BINS: usize = 32;

/// Normalized 2D histogram on `bounds = [x0, x1, y0, y1]`; points outside
/// are clamped to the border bins.
pub fn histogram(points: &[Complex64], bounds: [f64; 4], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins * bins];
    if points.is_empty() {
        return h;
    }
    let cell = |v: f64, lo: f64, hi: f64| -> usize {
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    };
    let w = 1.0 / points.len() as f64;
    for z in points {
        h[cell(z.im, bounds[2], bounds[3]) * bins + cell(z.re, bounds[0], bounds[1])] += w;
    }
    h
}

/// Normalized Van Vleck zeros for every degree of the list, their overlay
/// and the L1 distance between successive histograms. Report-only.
pub fn figure_vanvleck_cloud(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<CloudReport> {
    let op = &cfg.operator;
    let r = fuchs(op);
    if r != 1 {
        return Err(CliError::Failed(format!("Van Vleck cloud needs r = 1, operator has r = {r}")));
    }
    let n_list = cfg.n_list.clone().unwrap_or_else(|| cfg.n.into_iter().collect());
    let reports = with_pool(|| {
        n_list
            .par_iter()
            .map(|&n| enumerate_seeded(op, n, cfg.seed()))
            .collect::<Vec<_>>()
    })?;
    let clouds: Vec<Vec<Complex64>> = reports
        .into_iter()
        .map(|r| r.map(|rep| van_vleck_zeros(&rep)))
        .collect::<Result<_, _>>()?;
    let (_, q_roots, _) = leading_hull(op)?;
    let mut bounds = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for z in &q_roots {
        bounds = [bounds[0].min(z.re), bounds[1].max(z.re), bounds[2].min(z.im), bounds[3].max(z.im)];
    }
    let pad = cfg.eps.max(0.05 * (bounds[1] - bounds[0]).max(bounds[3] - bounds[2]));
    let bounds = [bounds[0] - pad, bounds[1] + pad, bounds[2] - pad, bounds[3] + pad];
    let hists: Vec<Vec<f64>> = clouds.iter().map(|c| histogram(c, bounds, CLOUD_BINS)).collect();
    let l1: Vec<f64> = hists
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).sum())
        .collect();

    let mut panel = Panel::new("normalized Van Vleck zeros");
    panel.points(&q_roots, 3.5, "black");
    let mut csv = String::from("n,x,y\n");
    for (i, (n, cloud)) in n_list.iter().zip(&clouds).enumerate() {
        panel.points(cloud, 1.6, PALETTE[i % PALETTE.len()]);
        for z in cloud {
            let _ = writeln!(csv, "{n},{:e},{:e}", z.re, z.im);
        }
    }
    rec.write("vanvleck_cloud.svg", &Figure::single(panel, 480.0).render())?;
    rec.write("vanvleck_cloud.csv", &csv)?;
    let report = CloudReport {
        n_list: n_list.clone(),
        counts: clouds.iter().map(Vec::len).collect(),
        bins: CLOUD_BINS,
        bounds,
        l1,
    };
    rec.write_json("vanvleck_cloud.json", &report)?;
    rec.report(
        "vanvleck_cloud",
        format!(
            "histogram L1 between successive degrees {:?}",
            report.l1.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
        ),
    );
    Ok(report)
}

/// `Q_k d^m/dz^m` with the leading coefficient of `op`.
pub fn monomial_operator(op: &LameOperator, m: usize) -> CliResult<LameOperator> {
    let mut q = vec![Poly::zero(); m + 1];
    q[m] = op.leading_coefficient().clone();
    Ok(LameOperator::new(q)?)
}

/// Overlays for the resemblance observations: the eigenpolynomial of
/// `Q_k d^{deg Q_k}` against the Van Vleck zeros of `op`, and the Stieltjes
/// cloud of `Q_k d^k`. Report-only.
pub fn figure_observations(cfg: &ExperimentConfig, rec: &mut Recorder, rep: &SpectrumReport) -> CliResult<()> {
    let op = &cfg.operator;
    let n = rep.n;
    let (_, q_roots, _) = leading_hull(op)?;
    let deg_q = op.leading_coefficient().degree().unwrap_or(0);
    let exact = monomial_operator(op, deg_q)?;
    let eigen = enumerate_seeded(&exact, n + 1, cfg.seed())?;
    let eigen_roots = stieltjes_zeros(&eigen);
    let vv = van_vleck_zeros(rep);
    let mut left = Panel::new(format!("eigenpolynomial, degree {}", n + 1));
    left.points(&q_roots, 3.5, "black").points(&eigen_roots, 1.6, "#1f77b4");
    let mut right = Panel::new(format!("Van Vleck zeros, n = {n}"));
    right.points(&q_roots, 3.5, "black").points(&vv, 1.6, "#d62728");
    let mut both = Panel::new("overlay");
    both.points(&q_roots, 3.5, "black")
        .points(&eigen_roots, 1.6, "#1f77b4")
        .points(&vv, 1.6, "#d62728");
    rec.write("observation1.svg", &Figure::grid(vec![left, right, both], 3, 320.0).render())?;
    rec.write(
        "observation1.csv",
        &points_csv(&[("eigenpolynomial", &eigen_roots), ("van_vleck", &vv), ("q", &q_roots)]),
    )?;
    rec.report(
        "observation1",
        format!("{} eigenpolynomial roots against {} Van Vleck zeros", eigen_roots.len(), vv.len()),
    );

    let leading = monomial_operator(op, op.order())?;
    let lead_rep = enumerate_seeded(&leading, n, cfg.seed())?;
    let cloud = stieltjes_zeros(&lead_rep);
    let mut panel = Panel::new(format!("Stieltjes zeros of Q d^{}, n = {n}", op.order()));
    panel.points(&q_roots, 3.5, "black").points(&cloud, 1.0, "#1f77b4");
    let mut vv_panel = Panel::new(format!("Van Vleck zeros, n = {n}"));
    vv_panel.points(&q_roots, 3.5, "black").points(&vv, 1.6, "#d62728");
    rec.write("observation2.svg", &Figure::grid(vec![panel, vv_panel], 2, 320.0).render())?;
    rec.write(
        "observation2.csv",
        &points_csv(&[("stieltjes", &cloud), ("van_vleck", &vv), ("q", &q_roots)]),
    )?;
    rec.report(
        "observation2",
        format!(
            "Stieltjes cloud of {} pairs for the leading term; Van Vleck clouds of order {} need r = 2 and are not computed",
            lead_rep.pairs.len(),
            op.order() - 1
        ),
    );
    Ok(())
}

pub fn figures(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let op = &cfg.operator;
    let n = cfg.n.unwrap_or_default();
    let r = fuchs(op);
    let rep = rec.stage("enumerate", |_| Ok(enumerate_seeded(op, n, cfg.seed())?))?;
    rec.stage("fig2", |rec| figure_grid(rec, op, &rep))?;
    if r == 1 {
        rec.stage("fig1", |rec| figure_union(rec, op, &rep))?;
        rec.stage("vanvleck_cloud", |rec| figure_vanvleck_cloud(cfg, rec).map(|_| ()))?;
        rec.stage("observations", |rec| figure_observations(cfg, rec, &rep))?;
    }
    if r == 0 || cfg.target.is_some() {
        rec.stage("interlacing", |rec| figure_interlacing(cfg, rec).map(|_| ()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lame_core::forest::{Edge, Vertex, VertexKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn segment_forest() -> SupportForest {
        let v = |x: f64| Vertex {
            z: c(x, 0.0),
            kind: VertexKind::QZero,
            multiplicity: 1,
            mass: 0.0,
        };
        SupportForest {
            k: 2,
            vertices: vec![v(-1.0), v(1.0)],
            edges: vec![Edge {
                from: 0,
                to: 1,
                polyline: vec![c(-1.0, 0.0), c(1.0, 0.0)],
                density: Vec::new(),
                mass: 0.0,
                skipped: 0,
                exceptional: false,
            }],
            cloud: Vec::new(),
            outliers: 0,
        }
    }

    #[test]
    fn perfect_alternation() {
        let f = segment_forest();
        let lower = [c(-0.5, 0.01), c(0.5, -0.01)];
        let upper = [c(-0.8, 0.0), c(0.0, 0.02), c(0.8, 0.0)];
        let (dropped, per_edge) = interlacing(&f, &lower, &upper, 0.1);
        let rep = alternation_report(2, 3, 0.1, dropped, &per_edge);
        assert_eq!(rep.alternation, Some(100.0));
        assert_eq!(rep.projected, 5);
    }

    #[test]
    fn broken_alternation() {
        let f = segment_forest();
        let lower = [c(-0.5, 0.0), c(-0.4, 0.0)];
        let upper = [c(0.5, 0.0), c(0.6, 0.0)];
        let (dropped, per_edge) = interlacing(&f, &lower, &upper, 0.1);
        let rep = alternation_report(2, 3, 0.1, dropped, &per_edge);
        assert!((rep.alternation.unwrap() - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_arc_length() {
        let line = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0)];
        let (s, d) = project(&line, c(1.2, 0.5));
        assert!((s - 1.5).abs() < 1e-12 && (d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn uniform_histogram_of_closed_form_zeros() {
        // zeros m/n of the normalized Van Vlecks for Q = z(z - 1)
        let zeros = |n: usize| -> Vec<Complex64> { (0..=n).map(|m| c(m as f64 / n as f64, 0.0)).collect() };
        let bounds = [-0.05, 1.05, -0.1, 0.1];
        let h = histogram(&zeros(400), bounds, 8);
        let total: f64 = h.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let l1_a: f64 = histogram(&zeros(50), bounds, 8).iter().zip(&h).map(|(a, b)| (a - b).abs()).sum();
        let l1_b: f64 = histogram(&zeros(200), bounds, 8).iter().zip(&h).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1_b < l1_a);
    }
}

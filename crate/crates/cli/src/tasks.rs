use std::fmt::Write as _;

use lame_core::forest::{
    build_from_roots, component_census, extended_support, plemelj_density, verify_straightening, verify_tree,
    AlgebraicBranch, ExtendedParams, SupportForest, VertexKind,
};
use lame_core::measure::{circle_probes, hull_check_against, probe_compare, RootMeasure};
use lame_core::operator::LameOperator;
use lame_core::poly::{ConvexHull, Poly};
use lame_core::spectral::{enumerate_seeded, select_sequence_seeded, SpectralPair, SpectrumReport, ACCEPT_RESIDUAL};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use crate::svg::{Figure, Panel};

pub const THREADS_ENV: &str = "LAME_SPECTRA_THREADS";

/// Runs `f` on a pool sized by `LAME_SPECTRA_THREADS` when it is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Fuchs index of a validated operator.
pub fn fuchs(op: &LameOperator) -> usize {
    op.fuchs_index().max(0) as usize
}

/// Monic leading coefficient `Q_k` and the convex hull of its roots.
pub fn leading_hull(op: &LameOperator) -> CliResult<(Poly, Vec<Complex64>, ConvexHull)> {
    let qt = op.leading_coefficient().monic()?;
    let roots = qt.roots()?;
    let hull = ConvexHull::new(&roots)?;
    Ok((qt, roots, hull))
}

/// The single pair of an exactly solvable operator, or the pair closest to
/// the target when `r = 1`.
pub fn pick_pairs(cfg: &ExperimentConfig, n_list: &[usize]) -> CliResult<Vec<SpectralPair>> {
    let op = &cfg.operator;
    match (fuchs(op), &cfg.target) {
        (0, _) => n_list
            .iter()
            .map(|&n| {
                let rep = enumerate_seeded(op, n, cfg.seed())?;
                Ok(rep.pairs.into_iter().next().ok_or(lame_core::Error::EmptySpectrum { n })?)
            })
            .collect(),
        (_, Some(target)) => Ok(select_sequence_seeded(op, target, n_list, cfg.seed())?),
        (r, None) => Err(CliError::Config {
            path: "target".into(),
            message: format!("a target is needed to pick one pair per degree when r = {r}"),
        }),
    }
}

pub fn branch_for(op: &LameOperator, pair: &SpectralPair) -> CliResult<AlgebraicBranch> {
    let qt = op.leading_coefficient().monic()?;
    Ok(AlgebraicBranch::new(&pair.normalized_v, &qt, op.order())?)
}

fn max_residual(rep: &SpectrumReport) -> f64 {
    rep.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
}

fn all_roots(rep: &SpectrumReport) -> Vec<Complex64> {
    rep.pairs
        .iter()
        .flat_map(|p| p.roots.iter().copied().chain(p.van_vleck_roots()))
        .collect()
}

fn spectrum_checks(rec: &mut Recorder, rep: &SpectrumReport, hull: Option<(&ConvexHull, f64)>) {
    let n = rep.n;
    rec.check(
        &format!("pair_count[n={n}]"),
        rep.found_count as u64 == rep.expected_count,
        format!("found {} of {} pairs", rep.found_count, rep.expected_count),
    );
    let res = max_residual(rep);
    rec.check(
        &format!("residual[n={n}]"),
        !rep.pairs.is_empty() && res <= ACCEPT_RESIDUAL,
        format!("max residual {res:.3e} (limit {ACCEPT_RESIDUAL:e})"),
    );
    if let Some((hull, eps)) = hull {
        let h = hull_check_against(&all_roots(rep), hull, eps);
        rec.check(
            &format!("hull[n={n}]"),
            h.pass,
            format!(
                "max distance {:.3e} to the hull of Q_k roots, {} beyond {eps}",
                h.max_distance,
                h.violators.len()
            ),
        );
    }
}

pub fn solve(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let n = cfg.n.unwrap_or_default();
    let rep = rec.stage("enumerate", |_| Ok(enumerate_seeded(&cfg.operator, n, cfg.seed())?))?;
    rec.write_json("spectrum.json", &rep)?;
    rec.write("spectrum.csv", &rep.to_csv())?;
    spectrum_checks(rec, &rep, None);
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    n: usize,
    expected: u64,
    found: usize,
    max_residual: f64,
    max_hull_distance: f64,
    seconds: f64,
}

pub fn spectrum_sweep(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let list = cfg.n_list.clone().unwrap_or_default();
    let (_, _, hull) = leading_hull(&cfg.operator)?;
    let results = rec.stage("enumerate", |_| {
        with_pool(|| {
            list.par_iter()
                .map(|&n| {
                    let start = std::time::Instant::now();
                    enumerate_seeded(&cfg.operator, n, cfg.seed()).map(|r| (r, start.elapsed().as_secs_f64()))
                })
                .collect::<Vec<_>>()
        })
    })?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,expected,found,max_residual,max_hull_distance\n");
    for result in results {
        let (rep, seconds) = result?;
        let h = hull_check_against(&all_roots(&rep), &hull, cfg.eps);
        rec.write(&format!("spectrum_n{}.csv", rep.n), &rep.to_csv())?;
        spectrum_checks(rec, &rep, Some((&hull, cfg.eps)));
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{:e}",
            rep.n,
            rep.expected_count,
            rep.found_count,
            max_residual(&rep),
            h.max_distance
        );
        rows.push(SweepRow {
            n: rep.n,
            expected: rep.expected_count,
            found: rep.found_count,
            max_residual: max_residual(&rep),
            max_hull_distance: h.max_distance,
            seconds,
        });
    }
    // timings vary between runs, so they stay out of the deterministic outputs
    let timings: Vec<String> = rows.iter().map(|r| format!("n={}: {:.3}s", r.n, r.seconds)).collect();
    rec.report("timings", timings.join(", "));
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "n": r.n, "expected": r.expected, "found": r.found,
                "max_residual": r.max_residual, "max_hull_distance": r.max_hull_distance,
            })
        })
        .collect();
    rec.write_json("sweep.json", &rows)?;
    rec.write("sweep.csv", &csv)?;
    Ok(())
}

/// Probe circle from the config, or the default circle around the roots of
/// `Q_k`.
pub fn probes_for(cfg: &ExperimentConfig, q_roots: &[Complex64]) -> Vec<Complex64> {
    let radius = cfg
        .probes
        .radius
        .unwrap_or_else(|| q_roots.iter().map(|z| z.norm()).fold(0.0, f64::max) + 1.5);
    circle_probes(Complex64::new(0.0, 0.0), radius, cfg.probes.count)
}

#[derive(Debug, Serialize)]
struct PairProbe {
    pair: usize,
    b: Complex64,
    max_error: f64,
    median_error: f64,
}

pub fn measure_check(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let n = cfg.n.unwrap_or_default();
    let op = &cfg.operator;
    let k = op.order();
    let (qt, q_roots, hull) = leading_hull(op)?;
    let rep = rec.stage("enumerate", |_| Ok(enumerate_seeded(op, n, cfg.seed())?))?;
    let h = hull_check_against(&all_roots(&rep), &hull, cfg.eps);
    rec.check(
        "hull",
        h.pass,
        format!("max distance {:.3e}, {} points beyond {}", h.max_distance, h.violators.len(), cfg.eps),
    );
    let probes = probes_for(cfg, &q_roots);
    let mut csv = String::from("pair,z_re,z_im,lhs_re,lhs_im,rhs_re,rhs_im,abs_err\n");
    let mut summary = Vec::new();
    rec.stage("probes", |_| {
        for (i, pair) in rep.pairs.iter().enumerate() {
            let mu = RootMeasure::from_roots(&pair.roots)?;
            let pr = probe_compare(&mu, &pair.normalized_v, &qt, k, &probes, cfg.probes.standoff)?;
            for p in &pr.probes {
                let _ = writeln!(
                    csv,
                    "{i},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    p.z.re, p.z.im, p.lhs.re, p.lhs.im, p.rhs.re, p.rhs.im, p.abs_error
                );
            }
            summary.push(PairProbe {
                pair: i,
                b: pair.b(),
                max_error: pr.max_error,
                median_error: pr.median_error,
            });
        }
        Ok(())
    })?;
    let worst = summary.iter().map(|p| p.max_error).fold(0.0, f64::max);
    rec.report(
        "probes",
        format!("{} probes per pair, largest |C^k - Vt/Qt| = {worst:.3e}", probes.len()),
    );
    rec.write("probes.csv", &csv)?;
    rec.write_json(
        "measure.json",
        &serde_json::json!({ "n": n, "hull": h, "probes": summary }),
    )?;
    Ok(())
}

/// Draws the edges, roots and atoms of a forest.
pub fn draw_forest(panel: &mut Panel, f: &SupportForest) {
    for e in &f.edges {
        if e.exceptional {
            panel.dashed(&e.polyline, 1.0, "#d62728");
        } else {
            panel.line(&e.polyline, 1.2, "#1f77b4");
        }
    }
    for v in &f.vertices {
        let (r, color) = match v.kind {
            VertexKind::QZero => (3.5, "black"),
            VertexKind::VZero => (5.0, "#d62728"),
            VertexKind::Atom => (5.0, "#9467bd"),
            VertexKind::Junction => (2.0, "#2ca02c"),
            VertexKind::Free => (2.0, "#7f7f7f"),
        };
        panel.points(&[v.z], r, color);
    }
}

pub fn forest_csv(f: &SupportForest) -> String {
    let mut out = String::from("edge,exceptional,index,x,y\n");
    for (i, e) in f.edges.iter().enumerate() {
        for (j, z) in e.polyline.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{j},{:e},{:e}", e.exceptional, z.re, z.im);
        }
    }
    out
}

pub fn density_csv(f: &SupportForest) -> String {
    let mut out = String::from("edge,s,x,y,rho\n");
    for (i, e) in f.edges.iter().enumerate() {
        for d in &e.density {
            let _ = writeln!(out, "{i},{:e},{:e},{:e},{:e}", d.s, d.z.re, d.z.im, d.rho);
        }
    }
    out
}

pub fn forest(cfg: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let n = cfg.n.unwrap_or_default();
    let op = &cfg.operator;
    let params = cfg.forest.params();
    let pair = rec.stage("spectrum", |_| Ok(pick_pairs(cfg, &[n])?.remove(0)))?;
    let b = branch_for(op, &pair)?;
    let built = rec.stage("build", |_| Ok(build_from_roots(&pair.roots, Some(&b), &params)))?;
    let f = match built {
        Ok(f) => f,
        Err(e) => {
            rec.check("build", false, e.to_string());
            return Ok(());
        }
    };
    rec.check(
        "build",
        true,
        format!("{} vertices, {} edges, {} outliers", f.vertices.len(), f.edges.len(), f.outliers),
    );
    let straight = rec.stage("straighten", |_| Ok(verify_straightening(&f, &b, cfg.forest.straighten_tol)))?;
    rec.check(
        "straightening",
        straight.pass,
        format!("max deviation {:.3e} (tol {})", straight.max_deviation, straight.tol),
    );
    let loose = f.unclassified_leaves();
    rec.check(
        "leaves",
        loose.is_empty(),
        format!("{} of {} leaves not at a root", loose.len(), f.leaves().len()),
    );
    let census = component_census(&f, &b, &params);
    let diffs: Vec<i64> = census.components.iter().map(|c| c.difference).collect();
    rec.check("census", census.pass, format!("Q-V differences per component {diffs:?}"));
    let (ext, traces) = rec.stage("extend", |_| Ok(extended_support(&f, &b, &ExtendedParams::default())?))?;
    let tree = verify_tree(&ext);
    rec.check(
        "tree",
        tree.pass,
        format!(
            "{} components, cycle rank {}, {} exceptional edges",
            tree.components,
            tree.cycle_rank,
            ext.edges.iter().filter(|e| e.exceptional).count()
        ),
    );
    let dens = rec.stage("density", |_| Ok(plemelj_density(&ext, &b, &cfg.forest.density())))?;
    rec.report("mass", format!("total mass {:.6}", dens.total_mass()));

    let mut panel = Panel::new(format!("support forest, n = {n}"));
    panel.points(&pair.roots, 1.2, "#7f7f7f");
    draw_forest(&mut panel, &dens);
    rec.write("forest.svg", &Figure::single(panel, 520.0).render())?;
    rec.write("forest.csv", &forest_csv(&dens))?;
    rec.write("density.csv", &density_csv(&dens))?;
    rec.write_json("forest.json", &dens.export())?;
    rec.write_json(
        "forest_report.json",
        &serde_json::json!({
            "n": n,
            "van_vleck": pair.normalized_v,
            "straightening": straight,
            "census": census,
            "tree": tree,
            "exceptional": traces,
        }),
    )?;
    Ok(())
}

//! Run directories: resolved config, fields, reports and a digest manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::coeffs::CoefficientField;
use crate::diagnostics::{
    boundary_point_report, nondegeneracy_audit, optimality_residual, perimeter_estimate, quasimin_audit,
    spread_points, BoundaryPointReport, Classification, Family, PointSettings, Window,
};
use crate::eigensolve::{solve_lowest, EigenBasis};
use crate::error::{Error, Result};
use crate::freeboundary::{distance_field, extract_boundary, nearest_on_boundary, BoundaryPolyline};
use crate::grid::{Field, Grid, Point};
use crate::io::{parse_config, read_field, write_field, write_report, render_heatmap, Json, RunConfig};
use crate::optimizer::{clusters_with_next, optimize_problem, threshold_components, ComponentMap, Problem, ShapeState};
use crate::oracle::{optimal_ball, rectangle_eigenvalues};

pub const CONFIG: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Adds `files` (names inside `dir`) with their SHA-256 digests to the
/// manifest, keeping entries written by earlier steps.
pub fn update_manifest(dir: &Path, files: &[&str]) -> Result<()> {
    let path = dir.join(MANIFEST);
    let mut entries: BTreeMap<String, Json> = BTreeMap::new();
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(m) = v.get("files").and_then(|f| f.as_object()) {
            for (k, d) in m {
                if let Some(s) = d.as_str() {
                    entries.insert(k.clone(), Json::from(s));
                }
            }
        }
    }
    for name in files {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        entries.insert(name.to_string(), Json::from(hex::encode(Sha256::digest(&bytes))));
    }
    write_report(&Json::obj([("files", Json::Obj(entries))]), &path)
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let text = cfg.to_json().render_plain();
    let path = dir.join(CONFIG);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn defaults_json(cfg: &RunConfig) -> Json {
    Json::arr(cfg.defaults_applied.iter().map(|s| Json::from(s.as_str())))
}

fn basis_json(basis: &EigenBasis) -> Json {
    Json::obj([
        ("lambdas", Json::from(basis.lambdas.clone())),
        ("residuals", Json::from(basis.residuals.clone())),
        ("iterations", Json::from(basis.iterations)),
        (
            "clusters",
            Json::arr(basis.clusters.iter().map(|&(a, b)| Json::from(vec![a, b]))),
        ),
    ])
}

/// Lowest `k` pairs of the full box (no penalization).
pub fn eigen_run(cfg: &RunConfig, out: &Path) -> Result<Json> {
    ensure_dir(out)?;
    let grid = cfg.grid()?;
    let problem = Problem::new(grid, cfg.coefficients()?)?;
    let basis = solve_lowest(&problem.k0, &problem.mass, cfg.k, cfg.optimizer.eig_tol, cfg.optimizer.seed)?;
    let u = Field::from_interior(grid, &basis.vectors)?;
    write_config(cfg, out)?;
    write_field(&u, &out.join("u.ssf"))?;
    let mut report = Json::obj([
        ("kind", Json::from("eigen")),
        ("basis", basis_json(&basis)),
        ("defaults_applied", defaults_json(cfg)),
    ]);
    if cfg.kind == "identity" {
        report.insert("oracle_rectangle", Json::from(rectangle_eigenvalues(cfg.extent[0], cfg.extent[1], cfg.k)?));
    }
    write_report(&report, &out.join("eigen.json"))?;
    update_manifest(out, &[CONFIG, "u.ssf", "eigen.json"])?;
    Ok(report)
}

fn components_json(c: &ComponentMap, k: usize) -> Json {
    Json::obj([
        ("count", Json::from(c.count)),
        ("exceeds_k", Json::from(c.exceeds(k))),
        ("disjoint", Json::from(c.disjoint())),
        ("touching", Json::arr(c.touching.iter().map(|&(a, b)| Json::from(vec![a, b])))),
        ("content", Json::arr(c.content.iter().map(|v| Json::from(v.clone())))),
        ("volume", Json::from(c.volume())),
    ])
}

fn barycenter(grid: &Grid, chi: &Field) -> Point {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for node in 0..grid.node_count() {
        if chi.get(node, 0) > 0.5 {
            let (i, j) = grid.node_ij(node);
            let p = grid.node_point(i, j);
            sx += p[0];
            sy += p[1];
            n += 1.0;
        }
    }
    [sx / n, sy / n]
}

/// Full optimization run; returns the report and the final state.
pub fn optimize_run(cfg: &RunConfig, out: &Path) -> Result<(Json, ShapeState)> {
    ensure_dir(out)?;
    let grid = cfg.grid()?;
    let problem = Problem::new(grid, cfg.coefficients()?)?;
    let state = optimize_problem(&problem, &cfg.optimize_options())?;
    let comps = threshold_components(&state.phi, 0.5)?.with_content(&problem, &state.basis);
    let u = Field::from_interior(grid, &state.basis.vectors)?;
    let boundary = extract_boundary(&comps.chi, 0.5)?;

    write_config(cfg, out)?;
    write_field(&state.phi, &out.join("phi.ssf"))?;
    write_field(&comps.chi, &out.join("chi.ssf"))?;
    write_field(&u, &out.join("u.ssf"))?;
    render_heatmap(&comps.chi, 0, &out.join("chi.pgm"))?;
    render_heatmap(&u, 0, &out.join("u1.pgm"))?;

    let volume = problem.volume(&state.phi);
    let objective = state.eigen_sum() + cfg.lambda * volume;
    let history = Json::arr(state.objective_history.iter().map(|e| {
        Json::obj([
            ("iteration", Json::from(e.iteration)),
            ("objective", Json::from(e.objective)),
            ("eps", Json::from(e.eps)),
        ])
    }));
    let mut report = Json::obj([
        ("kind", Json::from("optimize")),
        ("basis", basis_json(&state.basis)),
        ("lambda_next", Json::from(state.lambda_next)),
        ("clusters_with_next", Json::arr(clusters_with_next(&state).iter().map(|&(a, b)| Json::from(vec![a, b])))),
        ("objective", Json::from(objective)),
        ("volume", Json::from(volume)),
        ("eps", Json::from(state.eps)),
        ("history", history),
        ("components", components_json(&comps, cfg.k)),
        ("barycenter", Json::from(barycenter(&grid, &comps.chi))),
        (
            "boundary",
            Json::obj([
                ("points", Json::from(boundary.len())),
                ("length", Json::from(boundary.length())),
                ("chains", Json::from(boundary.chains.len())),
            ]),
        ),
        ("defaults_applied", defaults_json(cfg)),
    ]);
    if cfg.kind == "identity" && cfg.k == 1 && cfg.lambda > 0.0 {
        let ball = optimal_ball(cfg.lambda)?;
        report.insert(
            "oracle_ball",
            Json::obj([("r_star", Json::from(ball.r_star)), ("j_star", Json::from(ball.j_star))]),
        );
    }
    write_report(&report, &out.join("report.json"))?;
    update_manifest(out, &[CONFIG, "phi.ssf", "chi.ssf", "u.ssf", "chi.pgm", "u1.pgm", "report.json"])?;
    Ok((report, state))
}

/// A run directory read back from disk.
pub struct LoadedRun {
    pub cfg: RunConfig,
    pub grid: Grid,
    pub cf: CoefficientField,
    pub phi: Field,
    pub chi: Field,
    pub u: Field,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let path = dir.join(CONFIG);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let cfg = parse_config(&text)?;
    let grid = cfg.grid()?;
    let cf = cfg.coefficients()?;
    let phi = read_field(&dir.join("phi.ssf"), &grid)?;
    let chi = read_field(&dir.join("chi.ssf"), &grid)?;
    let u = read_field(&dir.join("u.ssf"), &grid)?;
    Ok(LoadedRun { cfg, grid, cf, phi, chi, u })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointSelection {
    /// Configured number of points spread along the boundary.
    Default,
    Spread(usize),
    Nearest(Point),
}

/// Everything `diagnose` computes, before serialization.
pub struct Diagnosis {
    pub boundary: BoundaryPolyline,
    pub points: Vec<BoundaryPointReport>,
    pub residual: crate::diagnostics::OptimalityResidual,
    pub nondegeneracy: crate::diagnostics::NondegeneracyReport,
    pub components: ComponentMap,
}

pub fn settings(run: &LoadedRun) -> PointSettings {
    let d = &run.cfg.diagnostics;
    PointSettings {
        lambda: run.cfg.lambda,
        delta_a: run.cf.bounds.delta_a,
        delta_tol: d.delta_tol,
        quad: d.quad,
        weiss_radii: d.weiss_radii,
        weiss_r_max: d.weiss_r_max,
        blowup_cells: d.blowup_cells.clone(),
        ref_resolution: d.ref_resolution,
        theta_radii: d.theta_radii,
        harnack_cells: d.harnack_cells,
    }
}

pub fn diagnose(run: &LoadedRun, sel: PointSelection) -> Result<Diagnosis> {
    use rayon::prelude::*;
    let h = run.grid.h;
    let boundary = extract_boundary(&run.chi, 0.5)?;
    let residual = optimality_residual(&run.u, &run.cf, run.cfg.lambda, &boundary, run.cfg.diagnostics.d_in_cells * h)?;
    let dist = distance_field(&run.grid, &boundary)?;
    let components = threshold_components(&run.phi, 0.5)?;
    let nondegeneracy = nondegeneracy_audit(&run.u, &run.chi, &dist, &components, &run.cf, &boundary)?;
    let chosen = match sel {
        PointSelection::Default => spread_points(&boundary, run.cfg.diagnostics.points),
        PointSelection::Spread(n) => spread_points(&boundary, n),
        PointSelection::Nearest(p) => {
            let (_, seg, t) = nearest_on_boundary(&boundary, p);
            let (a, b) = boundary.segments[seg];
            vec![if t < 0.5 { a } else { b }]
        }
    };
    let rho: BTreeMap<usize, f64> = residual.points.iter().copied().zip(residual.rho.iter().copied()).collect();
    let s = settings(run);
    let points = chosen
        .par_iter()
        .map(|&i| boundary_point_report(&run.u, &run.chi, &run.cf, &boundary, i, rho.get(&i).copied(), &s))
        .collect();
    Ok(Diagnosis {
        boundary,
        points,
        residual,
        nondegeneracy,
        components,
    })
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut yes, mut all) = (0usize, 0usize);
    for f in flags {
        all += 1;
        yes += f as usize;
    }
    if all == 0 {
        f64::NAN
    } else {
        yes as f64 / all as f64
    }
}

fn point_json(p: &BoundaryPointReport) -> Json {
    let weiss = p.weiss.as_ref().map_or(Json::Null, |w| {
        Json::obj([
            ("radii", Json::from(w.radii.clone())),
            ("w", Json::from(w.w.clone())),
            ("fitted_c", Json::from(w.fitted_c)),
            ("max_backward_drop", Json::from(w.max_backward_drop)),
        ])
    });
    let harnack = p.harnack.as_ref().map_or(Json::Null, |a| {
        Json::obj([
            ("samples", Json::from(a.positions.len())),
            ("sup", Json::from(a.sup)),
            ("alpha", Json::from(a.alpha)),
            ("seminorm", Json::from(a.seminorm)),
            ("g", Json::from(a.g)),
        ])
    });
    Json::obj([
        ("index", Json::from(p.index)),
        ("x0", Json::from(p.x0)),
        ("blowup_center", Json::from(p.blowup_center)),
        ("theta", Json::from(p.theta)),
        ("theta_radii", Json::from(p.theta_radii.clone())),
        ("theta_per_radius", Json::from(p.theta_per_radius.clone())),
        ("classification", Json::from(p.classification.as_str())),
        ("weiss", weiss),
        ("weiss_limit", Json::from(p.weiss_limit)),
        ("optimality_residual", Json::from(p.optimality_residual)),
        ("blowup_radii", Json::from(p.blowup_radii.clone())),
        ("homogeneity_defects", Json::from(p.homogeneity_defects.clone())),
        ("alignment_defects", Json::from(p.alignment_defects.clone())),
        ("harnack", harnack),
        ("errors", Json::arr(p.errors.iter().map(|s| Json::from(s.as_str())))),
    ])
}

pub fn diagnosis_json(run: &LoadedRun, d: &Diagnosis) -> Json {
    let h = run.grid.h;
    let regular: Vec<&BoundaryPointReport> = d
        .points
        .iter()
        .filter(|p| p.classification == Classification::Regular)
        .collect();
    let mean_defect = if d.points.is_empty() {
        f64::NAN
    } else {
        d.points.iter().map(|p| (p.theta - 0.5).abs()).sum::<f64>() / d.points.len() as f64
    };
    let decreasing = fraction(regular.iter().filter_map(|p| {
        Some(p.homogeneity_at_cells(2.0, h)? < p.homogeneity_at_cells(8.0, h)?)
    }));
    let aligned = fraction(regular.iter().map(|p| p.alignment_defect() < 0.05));
    let nd = &d.nondegeneracy;
    let r = &d.residual;
    Json::obj([
        ("kind", Json::from("diagnose")),
        (
            "boundary",
            Json::obj([
                ("points", Json::from(d.boundary.len())),
                ("inside_d", Json::from(d.boundary.interior_points().count())),
                ("length", Json::from(d.boundary.length())),
            ]),
        ),
        (
            "optimality",
            Json::obj([
                ("evaluated", Json::from(r.points.len())),
                ("median", Json::from(r.median)),
                ("p90", Json::from(r.p90)),
                ("max", Json::from(r.max)),
                ("skipped", Json::from(r.skipped.clone())),
            ]),
        ),
        (
            "nondegeneracy",
            Json::obj([
                ("main_component", Json::from(nd.main_component)),
                ("c_lower", Json::from(nd.c_lower)),
                ("c_lower_over_sqrt_lambda", Json::from(nd.c_lower / run.cfg.lambda.sqrt())),
                ("c1", Json::from(nd.c1)),
                ("c1_per_component", Json::from(nd.c1_per_component.clone())),
                ("eta", Json::from(nd.eta)),
                ("density_min", Json::from(nd.density_min)),
                ("density_max", Json::from(nd.density_max)),
            ]),
        ),
        ("components", components_json(&d.components, run.cfg.k)),
        (
            "summary",
            Json::obj([
                ("sampled", Json::from(d.points.len())),
                ("regular_fraction", Json::from(fraction(d.points.iter().map(|p| p.classification == Classification::Regular)))),
                ("mean_theta_defect", Json::from(mean_defect)),
                ("homogeneity_decreasing_fraction", Json::from(decreasing)),
                ("alignment_below_005_fraction", Json::from(aligned)),
            ]),
        ),
        ("points", Json::arr(d.points.iter().map(point_json))),
    ])
}

pub fn diagnose_run(dir: &Path, sel: PointSelection) -> Result<Json> {
    let run = load_run(dir)?;
    let d = diagnose(&run, sel)?;
    let report = diagnosis_json(&run, &d);
    write_report(&report, &dir.join("diagnose.json"))?;
    update_manifest(dir, &["diagnose.json"])?;
    Ok(report)
}

/// Perimeter of `{|u₁| > 0⁺}` and the co-area averages `P(t/2^m)`, m = 0..=3.
pub fn perimeter_json(u: &Field, level_fraction: f64) -> Result<Json> {
    let t = level_fraction * u.component(0).max_abs();
    let mut rows = Vec::new();
    let mut perimeter = f64::NAN;
    for m in 0..4 {
        let tm = t / f64::from(1u32 << m);
        let e = perimeter_estimate(u, 0, tm, Window::All)?;
        if m == 0 {
            perimeter = e.perimeter;
        }
        rows.push(Json::obj([("t", Json::from(tm)), ("coarea_average", Json::from(e.coarea_average))]));
    }
    Ok(Json::obj([("t", Json::from(t)), ("perimeter", Json::from(perimeter)), ("coarea", Json::Arr(rows))]))
}

/// Re-solves the final state and runs the quasi-minimality and perimeter audits.
pub fn audit_run(dir: &Path, trials: usize) -> Result<Json> {
    let run = load_run(dir)?;
    let problem = Problem::new(run.grid, run.cf.clone())?;
    let o = &run.cfg.optimizer;
    let state = problem.state(run.phi.clone(), run.cfg.eps.eps_min, run.cfg.lambda, run.cfg.k, o.eig_tol, o.seed)?;
    let audit = quasimin_audit(&problem, &state, trials, o.seed)?;
    let by_family = Json::obj([Family::Truncation, Family::Harmonic, Family::Flip].map(|f| {
        let v = audit.min_for(f);
        (f.as_str(), Json::from(if v.is_finite() { Some(v) } else { None }))
    }));
    let report = Json::obj([
        ("kind", Json::from("audit")),
        (
            "quasimin",
            Json::obj([
                ("trials", Json::from(audit.trials.len() + audit.skipped)),
                ("skipped", Json::from(audit.skipped)),
                ("baseline", Json::from(audit.baseline)),
                ("min_margin", Json::from(audit.min_margin)),
                ("min_by_family", by_family),
            ]),
        ),
        ("perimeter", perimeter_json(&run.u, run.cfg.diagnostics.level_fraction)?),
    ]);
    write_report(&report, &dir.join("audit.json"))?;
    update_manifest(dir, &["audit.json"])?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    Square,
    Rect,
    Disk,
}

/// Closed-form reference values as a report.
pub fn oracle_report(case: OracleCase, lambda: f64) -> Result<Json> {
    Ok(match case {
        OracleCase::Square => Json::obj([
            ("case", Json::from("square")),
            ("lambdas", Json::from(rectangle_eigenvalues(1.0, 1.0, 4)?)),
        ]),
        OracleCase::Rect => Json::obj([
            ("case", Json::from("rect")),
            ("extent", Json::from([1.0, 2.0])),
            ("lambdas", Json::from(rectangle_eigenvalues(1.0, 2.0, 4)?)),
        ]),
        OracleCase::Disk => {
            let b = optimal_ball(lambda)?;
            Json::obj([
                ("case", Json::from("disk")),
                ("lambda", Json::from(lambda)),
                ("r_star", Json::from(b.r_star)),
                ("j_star", Json::from(b.j_star)),
            ])
        }
    })
}

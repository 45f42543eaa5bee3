//! All point diagnostics at one boundary point.

use crate::coeffs::CoefficientField;
use crate::freeboundary::BoundaryPolyline;
use crate::grid::{Field, Point};

use super::blowup::{blowup_audit, refined_center};
use super::chart::make_chart;
use super::density::{classify_point, density_theta, theta_radii, Classification};
use super::geometric_radii;
use super::harnack::{harnack_quotient_audit, HarnackAudit};
use super::weiss::{weiss_monotonicity_audit, WeissProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct PointSettings {
    pub lambda: f64,
    pub delta_a: f64,
    pub delta_tol: f64,
    pub quad: (usize, usize),
    pub weiss_radii: usize,
    /// Default `16h`; always capped by the chart.
    pub weiss_r_max: Option<f64>,
    pub blowup_cells: Vec<f64>,
    pub ref_resolution: usize,
    pub theta_radii: usize,
    pub harnack_cells: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPointReport {
    pub index: usize,
    pub x0: Point,
    /// Blow-up centre after the normal refinement.
    pub blowup_center: Point,
    pub theta: f64,
    pub theta_radii: Vec<f64>,
    pub theta_per_radius: Vec<f64>,
    pub classification: Classification,
    pub weiss: Option<WeissProfile>,
    pub weiss_limit: f64,
    pub optimality_residual: Option<f64>,
    pub blowup_radii: Vec<f64>,
    pub homogeneity_defects: Vec<f64>,
    pub alignment_defects: Vec<f64>,
    pub harnack: Option<HarnackAudit>,
    /// Sub-audits that could not run at this point.
    pub errors: Vec<String>,
}

impl BoundaryPointReport {
    /// Alignment defect at the smallest blow-up radius.
    pub fn alignment_defect(&self) -> f64 {
        self.alignment_defects.last().copied().unwrap_or(f64::NAN)
    }

    pub fn homogeneity_at_cells(&self, cells: f64, h: f64) -> Option<f64> {
        self.blowup_radii
            .iter()
            .position(|&r| (r - cells * h).abs() <= 1e-9 * r)
            .map(|i| self.homogeneity_defects[i])
    }
}

/// Runs density, Weiss, blow-up and quotient audits at boundary point
/// `index`. `rho` is the point's optimality residual, if it was evaluated.
pub fn boundary_point_report(
    u: &Field,
    chi: &Field,
    cf: &CoefficientField,
    boundary: &BoundaryPolyline,
    index: usize,
    rho: Option<f64>,
    s: &PointSettings,
) -> BoundaryPointReport {
    let h = u.grid().h;
    let p = boundary.points[index];
    let mut errors = Vec::new();
    let mut note = |what: &str, e: crate::Error| errors.push(format!("{what}: {e}"));

    let (mut theta, mut t_radii, mut t_per) = (f64::NAN, Vec::new(), Vec::new());
    let (mut weiss, mut weiss_limit) = (None, f64::NAN);
    match make_chart(cf, p) {
        Ok(chart) => {
            t_radii = theta_radii(h, chart.r_valid, s.theta_radii);
            match density_theta(chi, &chart, &t_radii) {
                Ok((t, per)) => {
                    theta = t;
                    t_per = per;
                }
                Err(e) => note("density", e),
            }
            let hi = s.weiss_r_max.unwrap_or(16.0 * h).min(chart.r_valid);
            let radii = if hi > 2.0 * h {
                geometric_radii(2.0 * h, hi, s.weiss_radii)
            } else {
                vec![2.0 * h]
            };
            match weiss_monotonicity_audit(u, chi, &chart, &radii, s.lambda, s.delta_a, s.quad) {
                Ok(w) => {
                    weiss_limit = w.limit();
                    weiss = Some(w);
                }
                Err(e) => note("weiss", e),
            }
        }
        Err(e) => note("chart", e),
    }
    let classification = if theta.is_nan() {
        Classification::Singular
    } else {
        classify_point(theta, s.delta_tol)
    };

    let mut blowup_center = p;
    let (mut b_radii, mut hom, mut ali) = (Vec::new(), Vec::new(), Vec::new());
    match refined_center(u, p, boundary.normals[index]).and_then(|c| {
        blowup_center = c;
        make_chart(cf, c)
    }) {
        Ok(chart) => {
            let radii: Vec<f64> = s
                .blowup_cells
                .iter()
                .map(|c| c * h)
                .filter(|&r| r <= chart.r_valid)
                .collect();
            if radii.is_empty() {
                note("blowup", crate::Error::BadParams("no radius fits the chart".into()));
            } else {
                match blowup_audit(u, &chart, &radii, s.ref_resolution, u.ncomp()) {
                    Ok(a) => {
                        b_radii = a.radii;
                        hom = a.homogeneity;
                        ali = a.alignment;
                    }
                    Err(e) => note("blowup", e),
                }
            }
        }
        Err(e) => note("blowup", e),
    }

    let harnack = if u.ncomp() >= 2 {
        match harnack_quotient_audit(u, chi, p, s.harnack_cells * h) {
            Ok(a) => Some(a),
            Err(e) => {
                note("harnack", e);
                None
            }
        }
    } else {
        None
    };

    BoundaryPointReport {
        index,
        x0: p,
        blowup_center,
        theta,
        theta_radii: t_radii,
        theta_per_radius: t_per,
        classification,
        weiss,
        weiss_limit,
        optimality_residual: rho,
        blowup_radii: b_radii,
        homogeneity_defects: hom,
        alignment_defects: ali,
        harnack,
        errors,
    }
}

/// `count` inside-D boundary points spread evenly along the chains.
pub fn spread_points(boundary: &BoundaryPolyline, count: usize) -> Vec<usize> {
    let mut seen = vec![false; boundary.len()];
    let mut order = Vec::new();
    for chain in &boundary.chains {
        for &i in chain {
            if boundary.inside_d[i] && !seen[i] {
                seen[i] = true;
                order.push(i);
            }
        }
    }
    if order.len() <= count {
        return order;
    }
    (0..count).map(|m| order[m * order.len() / count]).collect()
}

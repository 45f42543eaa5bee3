//! Empirical non-degeneracy constants: linear growth of `u₁`, `|U| ≤ C₁u₁`,
//! the `L∞` threshold `η`, and the two-sided density band.

use std::f64::consts::PI;

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::freeboundary::BoundaryPolyline;
use crate::grid::Field;
use crate::optimizer::ComponentMap;

use super::{nodes_in_ball, polar_nodes};

#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyReport {
    /// Component (label) carrying the most `u₁` mass.
    pub main_component: usize,
    /// `min u₁/dist` over the shape band `2h ≤ dist ≤ 8h`.
    pub c_lower: f64,
    /// `max |U|/u₁`.
    pub c1: f64,
    /// `max |uᵢ|/u₁` per component of `U`.
    pub c1_per_component: Vec<f64>,
    pub eta: f64,
    pub density_min: f64,
    pub density_max: f64,
}

pub fn nondegeneracy_audit(
    u: &Field,
    chi: &Field,
    dist: &Field,
    components: &ComponentMap,
    cf: &CoefficientField,
    boundary: &BoundaryPolyline,
) -> Result<NondegeneracyReport> {
    let grid = *u.grid();
    let h = grid.h;
    let k = u.ncomp();
    if components.count == 0 || !chi.values().iter().any(|&v| v > 0.5) {
        return Err(Error::EmptyShape);
    }
    let mut mass = vec![0.0; components.count + 1];
    for n in 0..grid.node_count() {
        mass[components.labels[n]] += u.get(n, 0) * u.get(n, 0);
    }
    let main = (1..=components.count)
        .max_by(|&a, &b| mass[a].total_cmp(&mass[b]))
        .unwrap_or(1);

    let mut c_lower = f64::INFINITY;
    let mut c1 = 0.0f64;
    let mut per = vec![0.0f64; k];
    for n in 0..grid.node_count() {
        if components.labels[n] != main || chi.get(n, 0) <= 0.5 {
            continue;
        }
        let u1 = u.get(n, 0);
        let d = dist.get(n, 0);
        if d >= 2.0 * h && d <= 8.0 * h {
            c_lower = c_lower.min(u1 / d);
        }
        if u1 > 0.0 {
            let mut norm = 0.0;
            for (c, slot) in per.iter_mut().enumerate() {
                let v = u.get(n, c);
                norm += v * v;
                *slot = slot.max(v.abs() / u1);
            }
            c1 = c1.max(norm.sqrt() / u1);
        }
    }
    if !c_lower.is_finite() {
        c_lower = f64::NAN;
    }

    let lam_a = cf.bounds.lam_a;
    let mut eta = f64::INFINITY;
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let band = 8.0 * h;
    let quad = polar_nodes(band, 32, 128);
    for i in boundary.interior_points() {
        let p = boundary.points[i];
        for r in [4.0 * h, 8.0 * h, 16.0 * h] {
            let mut sup = 0.0f64;
            for (a, b) in nodes_in_ball(&grid, p, lam_a * r) {
                let n = grid.node_index(a, b);
                let s: f64 = (0..k).map(|c| u.get(n, c).powi(2)).sum();
                sup = sup.max(s.sqrt());
            }
            eta = eta.min(sup / r);
        }
        if grid.dist_to_boundary(p) >= band {
            let mut inside = 0.0;
            for (xi, w) in &quad {
                if chi.sample_comp(0, [p[0] + xi[0], p[1] + xi[1]])? > 0.5 {
                    inside += w;
                }
            }
            let frac = inside / (PI * band * band);
            dmin = dmin.min(frac);
            dmax = dmax.max(frac);
        }
    }
    let finite_or_nan = |v: f64| if v.is_finite() { v } else { f64::NAN };
    Ok(NondegeneracyReport {
        main_component: main,
        c_lower,
        c1,
        c1_per_component: per,
        eta: finite_or_nan(eta),
        density_min: finite_or_nan(dmin),
        density_max: finite_or_nan(dmax),
    })
}

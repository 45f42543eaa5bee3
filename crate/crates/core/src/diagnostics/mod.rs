//! Audits of a computed free boundary in frozen coordinates.

pub mod blowup;
pub mod chart;
pub mod density;
pub mod harnack;
pub mod nondegeneracy;
pub mod optimality;
pub mod perimeter;
pub mod quasimin;
pub mod report;
pub mod weiss;

pub use blowup::{blowup_audit, refined_center, BlowupAudit};
pub use chart::{frozen_gradient, frozen_sample, make_chart, FrozenChart, GradientRule};
pub use density::{classify_point, density_theta, theta_radii, Classification};
pub use harnack::{harnack_quotient_audit, HarnackAudit};
pub use nondegeneracy::{nondegeneracy_audit, NondegeneracyReport};
pub use optimality::{optimality_residual, OptimalityResidual};
pub use perimeter::{perimeter_estimate, PerimeterEstimate, Window};
pub use report::{boundary_point_report, spread_points, BoundaryPointReport, PointSettings};
pub use quasimin::{quasimin_audit, Family, QuasiminAudit};
use crate::grid::{Grid, Point};

pub use weiss::{fit_weiss_profile, weiss, weiss_monotonicity_audit, WeissProfile};

/// Least-squares line through `(x, y)`; returns `(intercept, slope)`.
/// A single sample gives a flat line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len().min(y.len());
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return (my, 0.0);
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// `count` geometric radii from `lo` to `hi` inclusive.
pub fn geometric_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let q = (hi / lo).powf(1.0 / (count - 1) as f64);
            (0..count).map(|i| lo * q.powi(i as i32)).collect()
        }
    }
}

/// Nodes `(i, j)` within distance `r` of `c`.
pub(crate) fn nodes_in_ball(grid: &Grid, c: Point, r: f64) -> Vec<(usize, usize)> {
    let h = grid.h;
    let span = |o: f64, x: f64, n: usize| {
        let lo = ((x - r - o) / h - 1e-9).ceil().max(0.0) as usize;
        let hi = (((x + r - o) / h + 1e-9).floor().max(-1.0) + 1.0).min(n as f64 + 1.0) as usize;
        lo..hi
    };
    let mut out = Vec::new();
    for j in span(grid.origin[1], c[1], grid.ny) {
        for i in span(grid.origin[0], c[0], grid.nx) {
            let p = grid.node_point(i, j);
            if (p[0] - c[0]).hypot(p[1] - c[1]) <= r * (1.0 + 1e-12) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Midpoint polar nodes `(ξ, weight)` over the disk of radius `r`.
pub(crate) fn polar_nodes(r: f64, n_r: usize, n_theta: usize) -> Vec<([f64; 2], f64)> {
    let dr = r / n_r as f64;
    let dt = std::f64::consts::TAU / n_theta as f64;
    let mut out = Vec::with_capacity(n_r * n_theta);
    for m in 0..n_r {
        let rho = (m as f64 + 0.5) * dr;
        for l in 0..n_theta {
            let (s, c) = ((l as f64 + 0.5) * dt).sin_cos();
            out.push(([rho * c, rho * s], rho * dr * dt));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (a, b) = linear_fit(&x, &y);
        assert!((a - 0.5).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
        assert_eq!(linear_fit(&[1.0], &[3.0]), (3.0, 0.0));
    }

    #[test]
    fn polar_weights_sum_to_area() {
        let area: f64 = polar_nodes(0.3, 16, 64).iter().map(|(_, w)| w).sum();
        assert!((area - std::f64::consts::PI * 0.09).abs() < 1e-12);
        let r = geometric_radii(0.01, 0.16, 5);
        assert!((r[4] - 0.16).abs() < 1e-15 && (r[1] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn ball_enumeration() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 10).unwrap();
        let all = nodes_in_ball(&g, [0.5, 0.5], 0.1);
        assert_eq!(all.len(), 5);
        assert_eq!(nodes_in_ball(&g, [0.0, 0.0], 0.1).len(), 3);
        assert_eq!(nodes_in_ball(&g, [0.5, 0.5], 2.0).len(), 121);
    }
}

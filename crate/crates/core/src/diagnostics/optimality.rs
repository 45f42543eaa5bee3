//! Free-boundary condition `|A^{1/2}∇u₁| = g√Λ` sampled just inside the boundary.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::freeboundary::BoundaryPolyline;
use crate::grid::Field;

const NEAR_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityResidual {
    /// Boundary point indices that were evaluated.
    pub points: Vec<usize>,
    pub rho: Vec<f64>,
    /// Points whose probe value of `u₁` was below `1e-12`.
    pub skipped: Vec<usize>,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Residual at every inside-`D` boundary point, probed at `p − d_in ν`.
pub fn optimality_residual(
    u: &Field,
    cf: &CoefficientField,
    lambda: f64,
    boundary: &BoundaryPolyline,
    d_in: f64,
) -> Result<OptimalityResidual> {
    let h = u.grid().h;
    if !(d_in >= h * (1.0 - 1e-9) && d_in <= 4.0 * h * (1.0 + 1e-9)) {
        return Err(Error::BadParams(format!("inward offset {d_in} outside [h, 4h]")));
    }
    if !(lambda > 0.0) {
        return Err(Error::BadParams(format!("Λ must be positive, got {lambda}")));
    }
    let idx: Vec<usize> = boundary.interior_points().collect();
    if idx.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let sl = lambda.sqrt();
    let (mut points, mut rho, mut skipped) = (Vec::new(), Vec::new(), Vec::new());
    for i in idx {
        let p = boundary.points[i];
        let nu = boundary.normals[i];
        let q = [p[0] - d_in * nu[0], p[1] - d_in * nu[1]];
        let vals = u.sample(q)?;
        if vals[0].abs() < NEAR_ZERO {
            skipped.push(i);
            continue;
        }
        let s: f64 = vals[1..].iter().map(|v| (v / vals[0]).powi(2)).sum();
        let g = 1.0 / (1.0 + s).sqrt();
        let grad = u.central_gradient(0, q)?;
        let a = cf.matrix_at(p)?;
        let energy = a[0] * grad[0] * grad[0] + 2.0 * a[1] * grad[0] * grad[1] + a[2] * grad[1] * grad[1];
        points.push(i);
        rho.push((energy.max(0.0).sqrt() - g * sl).abs() / sl);
    }
    let mut sorted = rho.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(OptimalityResidual {
        points,
        median: quantile(&sorted, 0.5),
        p90: quantile(&sorted, 0.9),
        max: sorted.last().copied().unwrap_or(f64::NAN),
        rho,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeboundary::extract_boundary;
    use crate::grid::Grid;

    fn cone(g: Grid, slope: f64) -> (Field, BoundaryPolyline) {
        let r0 = 0.3;
        let u = Field::from_fn(g, |p| slope * (r0 - (p[0] - 0.5).hypot(p[1] - 0.5)).max(0.0));
        let phi = Field::from_fn(g, |p| (0.5 + ((r0 - (p[0] - 0.5).hypot(p[1] - 0.5)) / g.h)).clamp(0.0, 1.0));
        (u, extract_boundary(&phi, 0.5).unwrap())
    }

    #[test]
    fn exact_cone_and_double_slope() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 128).unwrap();
        let cf = CoefficientField::identity(g);
        let lambda = 400.0f64;
        let (u, b) = cone(g, lambda.sqrt());
        let r = optimality_residual(&u, &cf, lambda, &b, 2.0 * g.h).unwrap();
        assert!(r.median < 0.02 && r.skipped.is_empty(), "{}", r.median);
        let (u2, _) = cone(g, 2.0 * lambda.sqrt());
        let r2 = optimality_residual(&u2, &cf, lambda, &b, 2.0 * g.h).unwrap();
        assert!((r2.median - 1.0).abs() < 0.03, "{}", r2.median);
    }

    #[test]
    fn scaling_invariance() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let cf = CoefficientField::identity(g);
        let (u, b) = cone(g, 17.0);
        let c = 3.0;
        let cu = Field::from_values(g, 1, u.values().iter().map(|v| c * v).collect()).unwrap();
        let r1 = optimality_residual(&u, &cf, 250.0, &b, 2.0 * g.h).unwrap();
        let r2 = optimality_residual(&cu, &cf, c * c * 250.0, &b, 2.0 * g.h).unwrap();
        for (a, b) in r1.rho.iter().zip(&r2.rho) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn skips_and_errors() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let cf = CoefficientField::identity(g);
        let (_, b) = cone(g, 1.0);
        let z = Field::zeros(g, 1);
        let r = optimality_residual(&z, &cf, 1.0, &b, 2.0 * g.h).unwrap();
        assert!(r.rho.is_empty() && r.skipped.len() == b.len());
        assert!(optimality_residual(&z, &cf, 1.0, &b, 0.5 * g.h).is_err());
        let empty = BoundaryPolyline {
            points: vec![],
            normals: vec![],
            inside_d: vec![],
            segments: vec![],
            chains: vec![],
        };
        assert!(matches!(optimality_residual(&z, &cf, 1.0, &empty, g.h), Err(Error::EmptyBoundary)));
    }
}

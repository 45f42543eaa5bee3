//! Density `Θ` of the positivity set and regular/singular classification.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Field;

use super::chart::{frozen_sample, FrozenChart};
use super::{geometric_radii, linear_fit, polar_nodes};

const QUAD: (usize, usize) = (64, 256);
pub const DEFAULT_DELTA_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Regular,
    Singular,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Regular => "regular",
            Classification::Singular => "singular",
        }
    }
}

/// Fit window `[2h, min(r_valid/4, 16h)]`, geometric; collapses to `[2h]`
/// when the chart is too small for a window.
pub fn theta_radii(h: f64, r_valid: f64, count: usize) -> Vec<f64> {
    let lo = 2.0 * h;
    let hi = (0.25 * r_valid).min(16.0 * h);
    if hi <= lo {
        vec![lo]
    } else {
        geometric_radii(lo, hi, count)
    }
}

/// `θ(r) = |{χ_x > 1/2} ∩ B_r| / |B_r|` per radius, and the value at `r = 0`
/// of its least-squares line (clamped to `[0, 1]`).
pub fn density_theta(chi: &Field, chart: &FrozenChart, radii: &[f64]) -> Result<(f64, Vec<f64>)> {
    if radii.is_empty() {
        return Err(Error::BadParams("no radii".into()));
    }
    let mut per = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut inside = 0.0;
        for (xi, w) in polar_nodes(r, QUAD.0, QUAD.1) {
            if frozen_sample(chi, chart, xi)?[0] > 0.5 {
                inside += w;
            }
        }
        per.push(inside / (PI * r * r));
    }
    let est = linear_fit(radii, &per).0.clamp(0.0, 1.0);
    Ok((est, per))
}

pub fn classify_point(theta: f64, delta_tol: f64) -> Classification {
    if (theta - 0.5).abs() <= delta_tol {
        Classification::Regular
    } else {
        Classification::Singular
    }
}

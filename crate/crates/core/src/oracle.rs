//! Closed-form references for the flat case.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Lowest `count` Dirichlet eigenvalues of the Laplacian on `[0,Lx]×[0,Ly]`.
pub fn rectangle_eigenvalues(lx: f64, ly: f64, count: usize) -> Result<Vec<f64>> {
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() || count == 0 {
        return Err(Error::BadParams(format!(
            "rectangle ({lx}, {ly}) with count {count}"
        )));
    }
    // m alone already gives `count` candidates, so m, n ≤ count suffices.
    let mut all = Vec::with_capacity(count * count);
    for m in 1..=count {
        for n in 1..=count {
            let (m, n) = (m as f64, n as f64);
            all.push(PI * PI * (m * m / (lx * lx) + n * n / (ly * ly)));
        }
    }
    all.sort_by(f64::total_cmp);
    all.truncate(count);
    Ok(all)
}

/// `J₀(x)` by its power series; accurate for the small arguments used here.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..60 {
        term *= q / (m * m) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive zero of `J₀`, by bisection on `[2.40, 2.41]`.
pub fn bessel_j01() -> f64 {
    let (mut lo, mut hi) = (2.40f64, 2.41f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallOptimum {
    pub lambda: f64,
    pub r_star: f64,
    pub j_star: f64,
}

impl BallOptimum {
    /// `λ₁(B_R) + ΛπR²`.
    pub fn objective_at(&self, r: f64) -> f64 {
        let j = bessel_j01();
        j * j / (r * r) + self.lambda * PI * r * r
    }
}

/// Optimal disk for `λ₁(Ω) + Λ|Ω|` with flat coefficients.
pub fn optimal_ball(lambda: f64) -> Result<BallOptimum> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::BadParams(format!("Λ must be positive, got {lambda}")));
    }
    let j = bessel_j01();
    let r_star = (j * j / (lambda * PI)).powf(0.25);
    Ok(BallOptimum {
        lambda,
        r_star,
        j_star: 2.0 * j * j / (r_star * r_star),
    })
}

/// Half-plane blow-up profile `U = √Λ (x₂ − c)⁺` and `χ = 1{x₂ > c}`.
///
/// Nodes lying exactly on `x₂ = c` get `χ = 1/2`, so that the bilinear
/// superlevel set `{χ > 1/2}` is exactly the half-plane.
pub fn halfplane_fixture(grid: &Grid, lambda: f64, c: f64) -> Result<(Field, Field)> {
    let lo = grid.origin[1];
    let hi = grid.upper_corner()[1];
    if !(c > lo && c < hi) {
        return Err(Error::BadParams(format!(
            "offset {c} not strictly inside ({lo}, {hi})"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::BadParams(format!("Λ must be nonnegative, got {lambda}")));
    }
    let s = lambda.sqrt();
    let tol = 1e-12 * grid.h;
    let u = Field::from_fn(*grid, |p| s * (p[1] - c).max(0.0));
    let chi = Field::from_fn(*grid, |p| {
        if (p[1] - c).abs() <= tol {
            0.5
        } else if p[1] > c {
            1.0
        } else {
            0.0
        }
    });
    Ok((u, chi))
}

//! Frozen-coefficient chart `F(ξ) = x₀ + A_{x₀}^{1/2} ξ`.

use crate::coeffs::{spd_sqrt, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::{Field, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenChart {
    pub x0: Point,
    /// Entries `(s11, s12, s22)` of `A_{x₀}^{1/2}`.
    pub sqrt_a: [f64; 3],
    pub lam_a: f64,
    /// Largest radius whose image stays inside the box.
    pub r_valid: f64,
}

/// How gradients of the sampled field are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientRule {
    /// Nodal central differences, interpolated bilinearly.
    Central,
    /// Exact gradient of the bilinear interpolant.
    Interpolant,
}

impl FrozenChart {
    pub fn map(&self, xi: Point) -> Point {
        let s = self.sqrt_a;
        [
            self.x0[0] + s[0] * xi[0] + s[1] * xi[1],
            self.x0[1] + s[1] * xi[0] + s[2] * xi[1],
        ]
    }

    /// `Sᵀ g` (S is symmetric).
    pub fn pull_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let s = self.sqrt_a;
        [s[0] * g[0] + s[1] * g[1], s[1] * g[0] + s[2] * g[1]]
    }

    fn check(&self, xi: Point) -> Result<()> {
        let radius = xi[0].hypot(xi[1]);
        if radius > self.r_valid * (1.0 + 1e-12) {
            return Err(Error::OutOfChart {
                radius,
                r_valid: self.r_valid,
            });
        }
        Ok(())
    }
}

pub fn make_chart(cf: &CoefficientField, x0: Point) -> Result<FrozenChart> {
    let grid = cf.grid();
    if !grid.contains(x0) {
        return Err(Error::OutOfDomain { x: x0[0], y: x0[1] });
    }
    let a = cf.matrix_at(x0)?;
    let sqrt_a = spd_sqrt(a[0], a[1], a[2])?;
    let lam_a = cf.bounds.lam_a;
    Ok(FrozenChart {
        x0,
        sqrt_a,
        lam_a,
        r_valid: grid.dist_to_boundary(x0) / lam_a,
    })
}

/// `U(F(ξ))`, all components.
pub fn frozen_sample(u: &Field, chart: &FrozenChart, xi: Point) -> Result<Vec<f64>> {
    chart.check(xi)?;
    u.sample(chart.map(xi))
}

/// `∇U_{x₀}(ξ) = Sᵀ ∇U(F(ξ))` per component.
pub fn frozen_gradient(u: &Field, chart: &FrozenChart, xi: Point, rule: GradientRule) -> Result<Vec<[f64; 2]>> {
    chart.check(xi)?;
    let x = chart.map(xi);
    (0..u.ncomp())
        .map(|c| {
            let g = match rule {
                GradientRule::Central => u.central_gradient(c, x)?,
                GradientRule::Interpolant => u.interpolant_gradient(c, x)?,
            };
            Ok(chart.pull_gradient(g))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientKind;
    use crate::grid::Grid;

    fn diag_field(grid: Grid) -> CoefficientField {
        // ratio 4 at angle 0 gives A = diag(2, 1/2); rescale to diag(4, 1).
        let mut cf = CoefficientField::new(
            grid,
            CoefficientKind::Anisotropic { ratio: 4.0, angle: 0.0, angle_grad: [0.0, 0.0] },
        );
        cf.a11 = Field::from_fn(grid, |_| 4.0);
        cf.a22 = Field::from_fn(grid, |_| 1.0);
        cf.bounds.lam_a = 2.0;
        cf
    }

    #[test]
    fn identity_chart_is_translation() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 16).unwrap();
        let ch = make_chart(&CoefficientField::identity(g), [0.3, 0.6]).unwrap();
        assert_eq!(ch.map([0.1, -0.2]), [0.4, 0.39999999999999997]);
        assert!((ch.r_valid - 0.3).abs() < 1e-15);
        let u = Field::from_fn(g, |p| p[0] * p[0] + p[1]);
        let s = frozen_sample(&u, &ch, [0.0, 0.0]).unwrap();
        assert_eq!(s[0], u.sample_comp(0, [0.3, 0.6]).unwrap());
        let s = frozen_sample(&u, &ch, [0.05, 0.1]).unwrap();
        assert_eq!(s[0], u.sample_comp(0, [0.35, 0.7]).unwrap());
        assert!(matches!(frozen_sample(&u, &ch, [0.4, 0.0]), Err(Error::OutOfChart { .. })));
    }

    #[test]
    fn anisotropic_chart() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 16).unwrap();
        let cf = diag_field(g);
        let ch = make_chart(&cf, [0.5, 0.5]).unwrap();
        let p = ch.map([0.1, 0.0]);
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert!((ch.r_valid - 0.25).abs() < 1e-15);
        let (g1, g2) = (0.7, -1.3);
        let u = Field::from_fn(g, |p| g1 * p[0] + g2 * p[1] + 0.2);
        for rule in [GradientRule::Central, GradientRule::Interpolant] {
            let fg = frozen_gradient(&u, &ch, [0.05, -0.1], rule).unwrap()[0];
            assert!((fg[0] - 2.0 * g1).abs() < 1e-12 && (fg[1] - g2).abs() < 1e-12);
            let n2 = fg[0] * fg[0] + fg[1] * fg[1];
            assert!((n2 - (4.0 * g1 * g1 + g2 * g2)).abs() < 1e-10);
        }
        assert!(matches!(make_chart(&cf, [1.5, 0.5]), Err(Error::OutOfDomain { .. })));
    }
}

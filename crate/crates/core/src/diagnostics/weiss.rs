//! Weiss energy `W(U, r)` in frozen coordinates and its monotonicity audit.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{Field, Point};

use super::chart::{frozen_gradient, frozen_sample, FrozenChart, GradientRule};
use super::polar_nodes;

pub const MIN_QUAD: (usize, usize) = (16, 64);

#[derive(Debug, Clone, PartialEq)]
pub struct WeissProfile {
    pub x0: Point,
    pub radii: Vec<f64>,
    pub w: Vec<f64>,
    pub fitted_c: f64,
    pub max_backward_drop: f64,
}

impl WeissProfile {
    /// Spread `max W − min W` of the samples.
    pub fn range(&self) -> f64 {
        let hi = self.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.w.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Value of the least-squares line in `r` at `r = 0`.
    pub fn limit(&self) -> f64 {
        super::linear_fit(&self.radii, &self.w).0
    }
}

/// `W(U, r) = r⁻²(∫_{B_r}|∇U_x|² + Λ|{χ_x > 1/2} ∩ B_r|) − r⁻³∫_{∂B_r}|U_x|²`.
///
/// The Dirichlet term uses the exact gradient of the bilinear interpolant, so
/// a kink lying on a grid line is not smeared over two cells.
pub fn weiss(u: &Field, chi: &Field, chart: &FrozenChart, r: f64, lambda: f64, quad: (usize, usize)) -> Result<f64> {
    let (n_r, n_theta) = quad;
    if n_r < MIN_QUAD.0 || n_theta < MIN_QUAD.1 {
        return Err(Error::QuadTooCoarse { n_r, n_theta });
    }
    if !(r > 0.0) {
        return Err(Error::BadParams(format!("radius must be positive, got {r}")));
    }
    if r > chart.r_valid * (1.0 + 1e-12) {
        return Err(Error::OutOfChart {
            radius: r,
            r_valid: chart.r_valid,
        });
    }
    let mut dirichlet = 0.0;
    let mut positive = 0.0;
    for (xi, wt) in polar_nodes(r, n_r, n_theta) {
        let g = frozen_gradient(u, chart, xi, GradientRule::Interpolant)?;
        dirichlet += wt * g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>();
        if frozen_sample(chi, chart, xi)?[0] > 0.5 {
            positive += wt;
        }
    }
    let dt = TAU / n_theta as f64;
    let mut trace = 0.0;
    for l in 0..n_theta {
        let (s, c) = (l as f64 * dt).sin_cos();
        // The rim can sit a rounding error beyond r_valid.
        let xi = [r * c, r * s];
        let v = frozen_sample(u, chart, clamp_to(chart, xi))?;
        trace += v.iter().map(|x| x * x).sum::<f64>() * r * dt;
    }
    Ok((dirichlet + lambda * positive) / (r * r) - trace / (r * r * r))
}

fn clamp_to(chart: &FrozenChart, xi: Point) -> Point {
    let n = xi[0].hypot(xi[1]);
    if n > chart.r_valid {
        let s = chart.r_valid / n;
        [xi[0] * s, xi[1] * s]
    } else {
        xi
    }
}

/// Monotonicity fit of given Weiss samples with correction `C r^δ`.
pub fn fit_weiss_profile(x0: Point, radii: &[f64], w: &[f64], delta_a: f64) -> WeissProfile {
    let mut fitted_c = 0.0f64;
    let mut drop = 0.0f64;
    for i in 1..radii.len().min(w.len()) {
        let dw = w[i - 1] - w[i];
        drop = drop.max(dw);
        let dr = radii[i].powf(delta_a) - radii[i - 1].powf(delta_a);
        if dr > 0.0 {
            fitted_c = fitted_c.max(dw / dr);
        }
    }
    WeissProfile {
        x0,
        radii: radii.to_vec(),
        w: w.to_vec(),
        fitted_c,
        max_backward_drop: drop,
    }
}

/// Samples `W` at ascending `radii` (each at least two cells) and fits the
/// almost-monotone correction.
pub fn weiss_monotonicity_audit(
    u: &Field,
    chi: &Field,
    chart: &FrozenChart,
    radii: &[f64],
    lambda: f64,
    delta_a: f64,
    quad: (usize, usize),
) -> Result<WeissProfile> {
    let h = u.grid().h;
    if radii.is_empty() || radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::BadParams("radii must be strictly ascending".into()));
    }
    if radii[0] < 2.0 * h * (1.0 - 1e-9) {
        return Err(Error::BadParams(format!(
            "smallest radius {} is below two cells ({})",
            radii[0],
            2.0 * h
        )));
    }
    let w = radii
        .iter()
        .map(|&r| weiss(u, chi, chart, r, lambda, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_weiss_profile(chart.x0, radii, &w, delta_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientField;
    use crate::diagnostics::chart::make_chart;
    use crate::grid::Grid;
    use crate::oracle::halfplane_fixture;
    use std::f64::consts::PI;

    fn fixture() -> (Field, Field, FrozenChart) {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 128).unwrap();
        let (u, chi) = halfplane_fixture(&g, 1.0, 0.5).unwrap();
        let ch = make_chart(&CoefficientField::identity(g), [0.5, 0.5]).unwrap();
        (u, chi, ch)
    }

    #[test]
    fn halfplane_gives_half_density() {
        let (u, chi, ch) = fixture();
        for r in [0.05, 0.1, 0.2] {
            let w = weiss(&u, &chi, &ch, r, 1.0, (64, 256)).unwrap();
            assert!((w - PI / 2.0).abs() < 0.01 * PI / 2.0, "r={r}: {w}");
        }
        let p = weiss_monotonicity_audit(&u, &chi, &ch, &[0.05, 0.1, 0.2], 1.0, 1.0, (64, 256)).unwrap();
        assert!(p.max_backward_drop < 1e-3 && p.fitted_c < 1e-2, "{p:?}");
    }

    #[test]
    fn zero_and_full_density() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let ch = make_chart(&CoefficientField::identity(g), [0.5, 0.5]).unwrap();
        let z = Field::zeros(g, 1);
        assert_eq!(weiss(&z, &z, &ch, 0.2, 3.0, (16, 64)).unwrap(), 0.0);
        let u = Field::from_fn(g, |p| p[1] - 0.5);
        let one = Field::from_fn(g, |_| 1.0);
        let w = weiss(&u, &one, &ch, 0.2, 1.0, (64, 256)).unwrap();
        assert!((w - PI).abs() < 0.01 * PI, "{w}");
    }

    #[test]
    fn preconditions() {
        let (u, chi, ch) = fixture();
        assert!(matches!(weiss(&u, &chi, &ch, 0.1, 1.0, (8, 64)), Err(Error::QuadTooCoarse { .. })));
        assert!(matches!(weiss(&u, &chi, &ch, 0.6, 1.0, (16, 64)), Err(Error::OutOfChart { .. })));
        assert!(weiss_monotonicity_audit(&u, &chi, &ch, &[0.2, 0.1], 1.0, 1.0, (16, 64)).is_err());
        assert!(weiss_monotonicity_audit(&u, &chi, &ch, &[0.01], 1.0, 1.0, (16, 64)).is_err());
    }

    #[test]
    fn fit_arithmetic() {
        let p = fit_weiss_profile([0.0, 0.0], &[0.1, 0.2, 0.3], &[2.0, 1.9, 1.85], 1.0);
        assert!((p.fitted_c - 1.0).abs() < 1e-12);
        assert!((p.max_backward_drop - 0.1).abs() < 1e-12);
        let p = fit_weiss_profile([0.0, 0.0], &[0.1], &[2.0], 1.0);
        assert_eq!((p.fitted_c, p.max_backward_drop), (0.0, 0.0));
    }

    #[test]
    fn locality() {
        let (u, chi, ch) = fixture();
        let w0 = weiss(&u, &chi, &ch, 0.1, 1.0, (32, 128)).unwrap();
        let g = *u.grid();
        let mut far = u.clone();
        for j in 0..g.nodes_y() {
            for i in 0..g.nodes_x() {
                let p = g.node_point(i, j);
                if (p[0] - 0.5).hypot(p[1] - 0.5) > 0.2 {
                    far.set(g.node_index(i, j), 0, u.at(i, j, 0) + 7.0);
                }
            }
        }
        assert_eq!(weiss(&far, &chi, &ch, 0.1, 1.0, (32, 128)).unwrap(), w0);
    }
}

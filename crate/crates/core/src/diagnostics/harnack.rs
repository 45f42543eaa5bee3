//! Hölder fit of the quotients `uᵢ/u₁` near a boundary point.

use crate::error::{Error, Result};
use crate::grid::{Field, Point};

use super::{linear_fit, nodes_in_ball};

pub const MIN_SAMPLES: usize = 30;
const NEAR_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackAudit {
    pub p: Point,
    pub r: f64,
    pub positions: Vec<Point>,
    /// `q[s][i−2] = uᵢ/u₁` at sample `s`.
    pub quotients: Vec<Vec<f64>>,
    /// `max |q|` over samples.
    pub sup: f64,
    /// Fitted exponent, clamped to `[0.05, 1]`; `None` when `q` is constant.
    pub alpha: Option<f64>,
    /// `exp` of the fitted intercept; 0 for constant quotients.
    pub seminorm: f64,
    /// `g = 1/√(1 + |q|²)` at the sample nearest to `p`.
    pub g: f64,
}

pub fn harnack_quotient_audit(u: &Field, chi: &Field, p: Point, r: f64) -> Result<HarnackAudit> {
    let k = u.ncomp();
    if k < 2 {
        return Err(Error::BadParams("quotient audit needs k >= 2".into()));
    }
    let grid = *u.grid();
    let mut positions = Vec::new();
    let mut quotients = Vec::new();
    for (i, j) in nodes_in_ball(&grid, p, r) {
        let n = grid.node_index(i, j);
        let u1 = u.get(n, 0);
        if chi.get(n, 0) > 0.5 && u1 > NEAR_ZERO {
            positions.push(grid.node_point(i, j));
            quotients.push((1..k).map(|c| u.get(n, c) / u1).collect::<Vec<f64>>());
        }
    }
    if positions.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: positions.len(),
            need: MIN_SAMPLES,
        });
    }
    let norm = |q: &[f64]| q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sup = quotients.iter().map(|q| norm(q)).fold(0.0, f64::max);

    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            let dq: Vec<f64> = quotients[a].iter().zip(&quotients[b]).map(|(x, y)| x - y).collect();
            let dq = norm(&dq);
            if dq > 1e-14 * (1.0 + sup) {
                let dx = (positions[a][0] - positions[b][0]).hypot(positions[a][1] - positions[b][1]);
                lx.push(dx.ln());
                ly.push(dq.ln());
            }
        }
    }
    let (alpha, seminorm) = if lx.len() < 2 {
        (None, 0.0)
    } else {
        let (c, a) = linear_fit(&lx, &ly);
        (Some(a.clamp(0.05, 1.0)), c.exp())
    };
    let nearest = (0..positions.len())
        .min_by(|&a, &b| {
            let da = (positions[a][0] - p[0]).hypot(positions[a][1] - p[1]);
            let db = (positions[b][0] - p[0]).hypot(positions[b][1] - p[1]);
            da.total_cmp(&db)
        })
        .unwrap();
    let g = 1.0 / (1.0 + norm(&quotients[nearest]).powi(2)).sqrt();
    Ok(HarnackAudit {
        p,
        r,
        positions,
        quotients,
        sup,
        alpha,
        seminorm,
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn pair(g: Grid, f: impl Fn(f64, [f64; 2]) -> f64) -> (Field, Field) {
        let mut u = Field::zeros(g, 2);
        let mut chi = Field::zeros(g, 1);
        for n in 0..g.node_count() {
            let (i, j) = g.node_ij(n);
            let p = g.node_point(i, j);
            let u1 = (0.3 - (p[0] - 0.5).hypot(p[1] - 0.5)).max(0.0);
            u.set(n, 0, u1);
            u.set(n, 1, f(u1, p));
            chi.set(n, 0, if u1 > 0.0 { 1.0 } else { 0.0 });
        }
        (u, chi)
    }

    #[test]
    fn constant_quotients() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let (u, chi) = pair(g, |_, _| 0.0);
        let a = harnack_quotient_audit(&u, &chi, [0.8, 0.5], 0.1).unwrap();
        assert_eq!((a.seminorm, a.alpha, a.sup, a.g), (0.0, None, 0.0, 1.0));
        let (u, chi) = pair(g, |u1, _| 1.5 * u1);
        let a = harnack_quotient_audit(&u, &chi, [0.8, 0.5], 0.1).unwrap();
        assert_eq!(a.seminorm, 0.0);
        assert!((a.sup - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_quotient() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let (u, chi) = pair(g, |u1, p| u1 * (2.0 * p[1]));
        let a = harnack_quotient_audit(&u, &chi, [0.8, 0.5], 0.1).unwrap();
        let alpha = a.alpha.unwrap();
        assert!(alpha > 0.8, "{alpha}");
        assert!(a.seminorm > 0.5 && a.seminorm < 4.0, "{}", a.seminorm);
    }

    #[test]
    fn errors() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 16).unwrap();
        let (u, chi) = pair(g, |_, _| 0.0);
        assert!(matches!(
            harnack_quotient_audit(&u, &chi, [0.8, 0.5], 0.1),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(harnack_quotient_audit(&u.component(0), &chi, [0.8, 0.5], 0.1).is_err());
    }
}

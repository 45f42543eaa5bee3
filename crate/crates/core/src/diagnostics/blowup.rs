//! Blow-up rescalings `B̃_r(ξ) = U_x(rξ)/r`: homogeneity and alignment defects.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{Field, Point};

use super::chart::{frozen_sample, FrozenChart};

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupAudit {
    pub x0: Point,
    /// Descending.
    pub radii: Vec<f64>,
    pub homogeneity: Vec<f64>,
    pub alignment: Vec<f64>,
    /// Reference nodes `ξ` shared by all radii.
    pub reference: Vec<Point>,
    /// Per radius, per reference node, the `k` components of `B̃_r`.
    pub fields: Vec<Vec<Vec<f64>>>,
}

impl BlowupAudit {
    pub fn homogeneity_at(&self, r: f64) -> Option<f64> {
        self.radii
            .iter()
            .position(|&x| (x - r).abs() <= 1e-9 * r)
            .map(|i| self.homogeneity[i])
    }
}

/// Moves a boundary point along its outward normal to where the linear
/// extrapolation of `|U|` from one cell inside vanishes (at most one cell).
///
/// The grid boundary sits where the relaxed density crosses 1/2, which is
/// where `|U|` is still a fraction of a cell's growth above zero; blow-ups
/// about that point see a spurious constant offset at small radii.
pub fn refined_center(u: &Field, p: Point, normal: [f64; 2]) -> Result<Point> {
    let h = u.grid().h;
    let norm = |x: Point| -> Result<f64> { Ok(u.sample(x)?.iter().map(|v| v * v).sum::<f64>().sqrt()) };
    let b = norm(p)?;
    let q = [p[0] - h * normal[0], p[1] - h * normal[1]];
    if !u.grid().contains(q) {
        return Ok(p);
    }
    let slope = (norm(q)? - b) / h;
    if !(slope > 0.0) {
        return Ok(p);
    }
    let shift = (b / slope).min(h);
    let x = [p[0] + shift * normal[0], p[1] + shift * normal[1]];
    Ok(if u.grid().contains(x) { x } else { p })
}

/// Polar reference grid over `B₁` with `n` radial nodes `ρ = m/n` and `4n`
/// angles; the homogeneity defect uses the annulus `ρ ≥ 1/4`, with the radial
/// derivative taken by differences along each ray (exact for one-homogeneous
/// samples).
pub fn blowup_audit(u: &Field, chart: &FrozenChart, radii: &[f64], ref_resolution: usize, k: usize) -> Result<BlowupAudit> {
    let h = u.grid().h;
    let n = ref_resolution;
    if n < 4 {
        return Err(Error::BadParams(format!("reference resolution {n} below 4")));
    }
    if k == 0 || k > u.ncomp() {
        return Err(Error::BadParams(format!("k = {k} with {} components", u.ncomp())));
    }
    if radii.is_empty() || radii.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::BadParams("radii must be strictly descending".into()));
    }
    if *radii.last().unwrap() < 2.0 * h * (1.0 - 1e-9) {
        return Err(Error::BadParams(format!("radii must be at least two cells ({})", 2.0 * h)));
    }
    let n_theta = 4 * n;
    let mut reference = Vec::with_capacity(n * n_theta);
    for l in 0..n_theta {
        let (s, c) = ((l as f64 + 0.5) * TAU / n_theta as f64).sin_cos();
        for m in 1..=n {
            let rho = m as f64 / n as f64;
            reference.push([rho * c, rho * s]);
        }
    }
    let first = n.div_ceil(4).max(1);
    let mut homogeneity = Vec::with_capacity(radii.len());
    let mut alignment = Vec::with_capacity(radii.len());
    let mut fields = Vec::with_capacity(radii.len());
    for &r in radii {
        let vals = reference
            .iter()
            .map(|xi| {
                let v = frozen_sample(u, chart, [r * xi[0], r * xi[1]])?;
                Ok(v[..k].iter().map(|x| x / r).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let drho = 1.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for l in 0..n_theta {
            let ray = &vals[l * n..(l + 1) * n];
            for m in first..=n {
                let rho = m as f64 * drho;
                let idx = m - 1;
                let w = rho;
                for c in 0..k {
                    let d = if m < n {
                        (ray[idx + 1][c] - ray[idx - 1][c]) / (2.0 * drho)
                    } else {
                        (ray[idx][c] - ray[idx - 1][c]) / drho
                    };
                    let defect = rho * d - ray[idx][c];
                    num += w * defect * defect;
                    den += w * ray[idx][c] * ray[idx][c];
                }
            }
        }
        let total_w: f64 = (first..=n).map(|m| m as f64 * drho).sum::<f64>() * n_theta as f64;
        if (den / total_w).sqrt() < 1e-12 {
            return Err(Error::DegenerateField((den / total_w).sqrt()));
        }
        homogeneity.push(num / den);
        alignment.push(alignment_defect(&vals, k));
        fields.push(vals);
    }
    Ok(BlowupAudit {
        x0: chart.x0,
        radii: radii.to_vec(),
        homogeneity,
        alignment,
        reference,
        fields,
    })
}

/// `1 − σ₁²/Σσⱼ²` of the `k × samples` matrix.
fn alignment_defect(vals: &[Vec<f64>], k: usize) -> f64 {
    if k == 1 {
        return 0.0;
    }
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for v in vals {
        for a in 0..k {
            for b in 0..k {
                gram[(a, b)] += v[a] * v[b];
            }
        }
    }
    let trace = gram.trace();
    if trace <= 0.0 {
        return 0.0;
    }
    let top = SymmetricEigen::new(gram).eigenvalues.max();
    (1.0 - top / trace).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientField;
    use crate::diagnostics::chart::make_chart;
    use crate::grid::Grid;

    fn setup() -> (Grid, FrozenChart) {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 128).unwrap();
        let ch = make_chart(&CoefficientField::identity(g), [0.5, 0.5]).unwrap();
        (g, ch)
    }

    #[test]
    fn one_homogeneous_has_zero_defect() {
        let (g, ch) = setup();
        let u = Field::from_fn(g, |p| (p[1] - 0.5).max(0.0));
        let radii = [0.2, 0.1, 0.05, 0.02];
        let a = blowup_audit(&u, &ch, &radii, 16, 1).unwrap();
        for (h, al) in a.homogeneity.iter().zip(&a.alignment) {
            assert!(*h < 1e-20, "{h}");
            assert_eq!(*al, 0.0);
        }
    }

    #[test]
    fn quadratic_perturbation_decays() {
        let (g, ch) = setup();
        let u = Field::from_fn(g, |p| (p[1] - 0.5).max(0.0) + 0.1 * (p[1] - 0.5).powi(2));
        let a = blowup_audit(&u, &ch, &[0.4, 0.2, 0.1, 0.05], 16, 1).unwrap();
        assert!(a.homogeneity.windows(2).all(|w| w[1] < w[0]), "{:?}", a.homogeneity);
    }

    #[test]
    fn alignment_of_parallel_and_orthogonal_pairs() {
        let (g, ch) = setup();
        let mut u = Field::zeros(g, 2);
        let mut v = Field::zeros(g, 2);
        for j in 0..g.nodes_y() {
            for i in 0..g.nodes_x() {
                let p = g.node_point(i, j);
                let n = g.node_index(i, j);
                let s = (p[1] - 0.5).max(0.0);
                u.set(n, 0, s);
                u.set(n, 1, 3.0 * s);
                v.set(n, 0, (p[0] - 0.5).max(0.0));
                v.set(n, 1, (0.5 - p[0]).max(0.0));
            }
        }
        let a = blowup_audit(&u, &ch, &[0.1], 16, 2).unwrap();
        assert!(a.alignment[0] < 1e-12);
        let b = blowup_audit(&v, &ch, &[0.1], 16, 2).unwrap();
        assert!((b.alignment[0] - 0.5).abs() < 1e-2, "{}", b.alignment[0]);
    }

    #[test]
    fn errors() {
        let (g, ch) = setup();
        let z = Field::zeros(g, 1);
        assert!(matches!(blowup_audit(&z, &ch, &[0.1], 16, 1), Err(Error::DegenerateField(_))));
        let u = Field::from_fn(g, |p| p[0]);
        assert!(blowup_audit(&u, &ch, &[0.05, 0.1], 16, 1).is_err());
        assert!(matches!(blowup_audit(&u, &ch, &[0.6], 16, 1), Err(Error::OutOfChart { .. })));
    }

    #[test]
    fn refinement_moves_to_extrapolated_zero() {
        let (g, _) = setup();
        let u = Field::from_fn(g, |p| (0.5 - p[0]).max(0.0));
        // Point a quarter cell inside; outward normal +x.
        let p = [0.5 - 0.25 * g.h, 0.3];
        let x = refined_center(&u, p, [1.0, 0.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.3);
    }
}

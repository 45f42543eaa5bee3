//! Q1 stiffness and lumped mass on the interior nodes of a grid.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Rows shorter than this are applied sequentially.
const PAR_ROWS: usize = 4096;

/// Square sparse matrix in compressed row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(cols.len(), vals.len());
        assert_eq!(row_ptr[n], cols.len());
        SparseOperator {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn diagonal_matrix(diag: Vec<f64>) -> Self {
        let n = diag.len();
        SparseOperator {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: diag,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, _) = self.row(i);
            cols.iter().all(|&j| j == i)
        })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        if out.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: out.len(),
            });
        }
        let row = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum::<f64>()
        };
        if self.n >= PAR_ROWS {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
        } else {
            out.iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
        }
        Ok(())
    }

    /// `vᵀ A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let av = self.apply(v)?;
        Ok(av.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    /// Copy with `d` added to the diagonal. The diagonal must be in the pattern.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<SparseOperator> {
        if d.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: d.len(),
            });
        }
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            let r = out.row_ptr[i]..out.row_ptr[i + 1];
            let p = out.cols[r.clone()]
                .binary_search(&i)
                .expect("diagonal entry missing from pattern");
            out.vals[r.start + p] += di;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Element stiffness of a square Q1 cell with constant A; local order
/// (0,0), (1,0), (0,1), (1,1). Scale-free in two dimensions.
pub fn element_stiffness(a11: f64, a12: f64, a22: f64) -> [[f64; 4]; 4] {
    // 2×2 Gauss is exact for the quadratic integrand.
    let g = 0.5 / 3f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let mut ke = [[0.0; 4]; 4];
    for &x in &pts {
        for &y in &pts {
            let grads = [
                [-(1.0 - y), -(1.0 - x)],
                [1.0 - y, -x],
                [-y, 1.0 - x],
                [y, x],
            ];
            for a in 0..4 {
                let ag = [
                    a11 * grads[a][0] + a12 * grads[a][1],
                    a12 * grads[a][0] + a22 * grads[a][1],
                ];
                for b in 0..4 {
                    ke[a][b] += 0.25 * (ag[0] * grads[b][0] + ag[1] * grads[b][1]);
                }
            }
        }
    }
    ke
}

/// Stiffness matrix of `∫ A∇u·∇v (+ ∫ V u v lumped)` on interior nodes.
pub fn assemble_stiffness(
    grid: &Grid,
    cf: &CoefficientField,
    potential: Option<&Field>,
) -> Result<SparseOperator> {
    if let Some(v) = potential {
        if v.values().len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: v.values().len(),
            });
        }
        if let Some((node, &value)) = v.values().iter().enumerate().find(|(_, &x)| x < 0.0) {
            return Err(Error::NegativePotential { node, value });
        }
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let cell_mats: Vec<[[f64; 4]; 4]> = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            let (ci, cj) = (c % nx, c / nx);
            let corners = [
                grid.node_index(ci, cj),
                grid.node_index(ci + 1, cj),
                grid.node_index(ci, cj + 1),
                grid.node_index(ci + 1, cj + 1),
            ];
            let avg = |f: &Field| corners.iter().map(|&n| f.get(n, 0)).sum::<f64>() * 0.25;
            element_stiffness(avg(&cf.a11), avg(&cf.a12), avg(&cf.a22))
        })
        .collect();

    let n = grid.interior_count();
    let h2 = grid.h * grid.h;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let (i, j) = grid.interior_ij(r);
            let mut acc = [[0.0f64; 3]; 3];
            // Cells touching node (i, j): lower-left corner (i - 1 + di, j - 1 + dj).
            for dj in 0..2 {
                for di in 0..2 {
                    let (ci, cj) = (i - 1 + di, j - 1 + dj);
                    let ke = &cell_mats[cj * nx + ci];
                    let me = (1 - di) + 2 * (1 - dj);
                    for other in 0..4 {
                        let (oi, oj) = (ci + other % 2, cj + other / 2);
                        acc[oj + 1 - j][oi + 1 - i] += ke[me][other];
                    }
                }
            }
            if let Some(v) = potential {
                acc[1][1] += v.get(grid.node_index(i, j), 0) * h2;
            }
            let mut row = Vec::with_capacity(9);
            for (dj, line) in acc.iter().enumerate() {
                for (di, &val) in line.iter().enumerate() {
                    if let Some(c) = grid.interior_index(i + di - 1, j + dj - 1) {
                        if val != 0.0 || c == r {
                            row.push((c, val));
                        }
                    }
                }
            }
            row
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator::from_csr(n, row_ptr, cols, vals))
}

/// Lumped mass `b(xᵢ) h²` on interior nodes.
pub fn assemble_mass(grid: &Grid, cf: &CoefficientField) -> SparseOperator {
    let h2 = grid.h * grid.h;
    let diag = (0..grid.interior_count())
        .map(|r| {
            let (i, j) = grid.interior_ij(r);
            cf.b.get(grid.node_index(i, j), 0) * h2
        })
        .collect();
    SparseOperator::diagonal_matrix(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_coefficients, CoefficientKind, Potential};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;
    use std::f64::consts::PI;

    fn unit(nx: usize) -> Grid {
        Grid::new([0.0, 0.0], [1.0, 1.0], nx).unwrap()
    }

    #[test]
    fn laplacian_stencil() {
        let g = unit(8);
        let k = assemble_stiffness(&g, &CoefficientField::identity(g), None).unwrap();
        let r = g.interior_index(4, 4).unwrap();
        let (cols, vals) = k.row(r);
        assert_eq!(cols.len(), 9);
        for (&c, &v) in cols.iter().zip(vals) {
            let expect = if c == r { 8.0 / 3.0 } else { -1.0 / 3.0 };
            assert!((v - expect).abs() < 1e-14, "{c}: {v}");
        }
    }

    #[test]
    fn constants_in_kernel() {
        let g = unit(12);
        let p = json!({"ratio": 5.0, "angle": 0.3, "angle_grad": [1.0, 2.0]});
        let cf = make_coefficients(g, "anisotropic", p.as_object().unwrap()).unwrap();
        let k = assemble_stiffness(&g, &cf, None).unwrap();
        let ones = vec![1.0; k.dim()];
        let y = k.apply(&ones).unwrap();
        for r in 0..k.dim() {
            let (i, j) = g.interior_ij(r);
            if i >= 2 && j >= 2 && i <= g.nx - 2 && j <= g.ny - 2 {
                assert!(y[r].abs() < 1e-13, "{r}: {}", y[r]);
            }
        }
    }

    #[test]
    fn constant_potential_shifts_diagonal() {
        let g = unit(8);
        let cf = CoefficientField::identity(g);
        let c = 3.5;
        let v = Field::from_fn(g, |_| c);
        let k0 = assemble_stiffness(&g, &cf, None).unwrap();
        let kv = assemble_stiffness(&g, &cf, Some(&v)).unwrap();
        let d = k0.to_dense() - kv.to_dense();
        for i in 0..k0.dim() {
            for j in 0..k0.dim() {
                let expect = if i == j { -c * g.h * g.h } else { 0.0 };
                assert!((d[(i, j)] - expect).abs() < 1e-14);
            }
        }
        let bad = Field::from_fn(g, |p| if p[0] > 0.5 { -1.0 } else { 0.0 });
        assert!(matches!(
            assemble_stiffness(&g, &cf, Some(&bad)),
            Err(Error::NegativePotential { .. })
        ));
    }

    #[test]
    fn mass_examples() {
        let g = unit(8);
        let m = assemble_mass(&g, &CoefficientField::identity(g));
        assert!(m.diagonal().iter().all(|&v| v == 1.0 / 64.0));
        assert!(m.is_diagonal());
        let cf = CoefficientField::new(g, CoefficientKind::Drift(Potential::Constant { value: -2f64.ln() }));
        let m = assemble_mass(&g, &cf);
        assert!(m.diagonal().iter().all(|&v| (v - 2.0 / 64.0).abs() < 1e-15));

        // Node x₁ = ln 2 exactly: a grid with that spacing.
        let g = Grid::new([0.0, 0.0], [8.0 * 2f64.ln(), 8.0 * 2f64.ln()], 8).unwrap();
        let cf = CoefficientField::new(
            g,
            CoefficientKind::Drift(Potential::Linear { grad: [1.0, 0.0], offset: 0.0 }),
        );
        let m = assemble_mass(&g, &cf);
        let r = g.interior_index(1, 3).unwrap();
        assert!((m.get(r, r) - g.h * g.h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let id = SparseOperator::identity(5);
        let v = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(id.apply(&v).unwrap(), v);
        assert!(matches!(id.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));

        let g = unit(16);
        let cf = CoefficientField::identity(g);
        let k = assemble_stiffness(&g, &cf, None).unwrap();
        let m = assemble_mass(&g, &cf);
        assert!(k.apply(&vec![0.0; k.dim()]).unwrap().iter().all(|&x| x == 0.0));
        let s: Vec<f64> = (0..k.dim())
            .map(|r| {
                let (i, j) = g.interior_ij(r);
                let p = g.node_point(i, j);
                (PI * p[0]).sin() * (PI * p[1]).sin()
            })
            .collect();
        let ks = k.apply(&s).unwrap();
        let ms = m.apply(&s).unwrap();
        let rq = ks.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>()
            / ms.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
        let lam = 2.0 * PI * PI;
        assert!((rq - lam).abs() / lam < 2.0 * g.h * g.h * PI * PI, "{rq}");
        // The sine grid function is an exact eigenvector of the Q1/lumped pencil.
        for r in 0..k.dim() {
            assert!((ks[r] - rq * ms[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn element_matrix_identity() {
        let ke = element_stiffness(1.0, 0.0, 1.0);
        assert!((ke[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((ke[0][1] + 1.0 / 6.0).abs() < 1e-15);
        assert!((ke[0][3] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_psd_and_mass_bounds() {
        let g = unit(14);
        let p = json!({"potential": "gaussian", "amplitude": 1.5, "center": [0.4, 0.7], "width": 0.3});
        let cf = make_coefficients(g, "drift", p.as_object().unwrap()).unwrap();
        let k = assemble_stiffness(&g, &cf, None).unwrap();
        let m = assemble_mass(&g, &cf);
        assert!(k.max_asymmetry() <= 1e-12 * k.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h2 = g.h * g.h;
        let cb = cf.bounds.c_b;
        for _ in 0..100 {
            let v: Vec<f64> = (0..k.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(k.quadratic_form(&v).unwrap() > 0.0);
            let n2: f64 = v.iter().map(|x| x * x).sum();
            let q = m.quadratic_form(&v).unwrap();
            assert!(q >= h2 * n2 / cb * (1.0 - 1e-12) && q <= cb * h2 * n2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn galerkin_lower_bound() {
        // Lumped Q1 underestimates on the square: λ_h = (4/h²) sin²(πh/2)(...)-type formula
        // stays close to 2π² and positive.
        for nx in [8, 16, 32] {
            let g = unit(nx);
            let cf = CoefficientField::identity(g);
            let k = assemble_stiffness(&g, &cf, None).unwrap().to_dense();
            let m = assemble_mass(&g, &cf).diagonal();
            let n = m.len();
            let c = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (m[i] * m[j]).sqrt());
            let ev = c.symmetric_eigenvalues();
            let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
            let lam = 2.0 * PI * PI;
            assert!(lo > 0.0);
            assert!(lo >= lam - 10.0 * g.h * g.h * lam, "{nx}: {lo}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn anisotropic_symmetric_psd(ratio in 0.05f64..20.0, angle in 0.0f64..3.2, seed in 0u64..1000) {
            let g = unit(10);
            let p = json!({"ratio": ratio, "angle": angle, "angle_grad": [0.7, -0.4]});
            let cf = make_coefficients(g, "anisotropic", p.as_object().unwrap()).unwrap();
            let k = assemble_stiffness(&g, &cf, None).unwrap();
            prop_assert!(k.max_asymmetry() <= 1e-12 * k.max_abs());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..k.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(k.quadratic_form(&v).unwrap() > 0.0);
        }
    }
}

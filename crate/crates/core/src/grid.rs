//! Node-centered uniform lattice over a rectangular box, and nodal fields on it.
//!
//! Nodes are numbered row-major: node `(i, j)` sits at `origin + (i h, j h)` and
//! has index `j (nx + 1) + i`. The unknowns of every solver are the interior
//! nodes `1 <= i < nx`, `1 <= j < ny`, numbered row-major among themselves; the
//! boundary ring carries the homogeneous Dirichlet condition of the box.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Relative slack when testing whether a point lies in the closed box.
const BOX_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub extent: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Grid {
    /// Builds a grid with `nx` cells along x; `ny` follows from the aspect ratio.
    pub fn new(origin: Point, extent: [f64; 2], nx: usize) -> Result<Self> {
        if !(extent[0] > 0.0 && extent[1] > 0.0) || !extent.iter().all(|e| e.is_finite()) {
            return Err(Error::BadParams(format!(
                "box extent must be positive, got {extent:?}"
            )));
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(Error::BadParams(format!("box origin must be finite, got {origin:?}")));
        }
        if nx < 4 {
            return Err(Error::BadResolution(nx));
        }
        let ny = (nx as f64 * extent[1] / extent[0]).round() as usize;
        if ny < 4 {
            return Err(Error::BadResolution(ny));
        }
        let hx = extent[0] / nx as f64;
        let hy = extent[1] / ny as f64;
        if (hx - hy).abs() > 1e-9 * hx {
            return Err(Error::NonSquareCells(format!(
                "extent {extent:?} with nx = {nx} gives hx = {hx}, hy = {hy}"
            )));
        }
        Ok(Grid {
            origin,
            extent,
            nx,
            ny,
            h: hx,
        })
    }

    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_x() + i
    }

    #[inline]
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.nodes_x(), node / self.nodes_x())
    }

    #[inline]
    pub fn node_point(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Index among the interior unknowns, or `None` on the box boundary.
    #[inline]
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        if self.is_boundary_node(i, j) {
            None
        } else {
            Some((j - 1) * (self.nx - 1) + (i - 1))
        }
    }

    #[inline]
    pub fn interior_ij(&self, k: usize) -> (usize, usize) {
        (k % (self.nx - 1) + 1, k / (self.nx - 1) + 1)
    }

    pub fn upper_corner(&self) -> Point {
        [
            self.origin[0] + self.nx as f64 * self.h,
            self.origin[1] + self.ny as f64 * self.h,
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        let hi = self.upper_corner();
        let slack = BOX_SLACK * self.extent[0].max(self.extent[1]);
        (0..2).all(|a| p[a] >= self.origin[a] - slack && p[a] <= hi[a] + slack)
    }

    /// Distance from `p` to the boundary of the box (0 outside).
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        let hi = self.upper_corner();
        let d = (p[0] - self.origin[0])
            .min(hi[0] - p[0])
            .min(p[1] - self.origin[1])
            .min(hi[1] - p[1]);
        d.max(0.0)
    }

    /// Cell containing `p` and the local coordinates in `[0, 1]²`.
    pub fn locate(&self, p: Point) -> Result<(usize, usize, f64, f64)> {
        if !self.contains(p) || !p.iter().all(|c| c.is_finite()) {
            return Err(Error::OutOfDomain { x: p[0], y: p[1] });
        }
        let sx = ((p[0] - self.origin[0]) / self.h).clamp(0.0, self.nx as f64);
        let sy = ((p[1] - self.origin[1]) / self.h).clamp(0.0, self.ny as f64);
        let i = (sx.floor() as usize).min(self.nx - 1);
        let j = (sy.floor() as usize).min(self.ny - 1);
        Ok((i, j, sx - i as f64, sy - j as f64))
    }
}

/// Nodal values of a `ncomp`-vector field; node-interleaved, row-major nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    ncomp: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        assert!(ncomp >= 1, "field needs at least one component");
        Field {
            grid,
            ncomp,
            values: vec![0.0; ncomp * grid.node_count()],
        }
    }

    pub fn from_values(grid: Grid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        let expected = ncomp * grid.node_count();
        if ncomp == 0 || values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadParams(format!("non-finite field value at slot {bad}")));
        }
        Ok(Field {
            grid,
            ncomp,
            values,
        })
    }

    /// Scalar field from a closed-form function of the node position.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let mut out = Field::zeros(grid, 1);
        for j in 0..grid.nodes_y() {
            for i in 0..grid.nodes_x() {
                out.values[grid.node_index(i, j)] = f(grid.node_point(i, j));
            }
        }
        out
    }

    /// Builds a field from per-component vectors over the interior nodes; the box
    /// boundary ring is set to zero.
    pub fn from_interior(grid: Grid, comps: &[Vec<f64>]) -> Result<Self> {
        let n = grid.interior_count();
        let mut out = Field::zeros(grid, comps.len().max(1));
        for (c, v) in comps.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            for (k, &x) in v.iter().enumerate() {
                let (i, j) = grid.interior_ij(k);
                out.set(grid.node_index(i, j), c, x);
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, node: usize, c: usize) -> f64 {
        self.values[node * self.ncomp + c]
    }

    #[inline]
    pub fn set(&mut self, node: usize, c: usize, v: f64) {
        self.values[node * self.ncomp + c] = v;
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, c: usize) -> f64 {
        self.get(self.grid.node_index(i, j), c)
    }

    pub fn component(&self, c: usize) -> Field {
        let values = (0..self.grid.node_count()).map(|n| self.get(n, c)).collect();
        Field {
            grid: self.grid,
            ncomp: 1,
            values,
        }
    }

    /// Component `c` restricted to the interior unknowns.
    pub fn interior_values(&self, c: usize) -> Vec<f64> {
        (0..self.grid.interior_count())
            .map(|k| {
                let (i, j) = self.grid.interior_ij(k);
                self.at(i, j, c)
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear interpolant of every component at `p`.
    pub fn sample(&self, p: Point) -> Result<Vec<f64>> {
        let (i, j, tx, ty) = self.grid.locate(p)?;
        Ok((0..self.ncomp)
            .map(|c| self.bilinear(i, j, tx, ty, c))
            .collect())
    }

    pub fn sample_comp(&self, c: usize, p: Point) -> Result<f64> {
        let (i, j, tx, ty) = self.grid.locate(p)?;
        Ok(self.bilinear(i, j, tx, ty, c))
    }

    #[inline]
    fn bilinear(&self, i: usize, j: usize, tx: f64, ty: f64, c: usize) -> f64 {
        let v00 = self.at(i, j, c);
        let v10 = self.at(i + 1, j, c);
        let v01 = self.at(i, j + 1, c);
        let v11 = self.at(i + 1, j + 1, c);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Exact gradient of the bilinear interpolant of component `c` inside the
    /// cell containing `p`.
    pub fn interpolant_gradient(&self, c: usize, p: Point) -> Result<[f64; 2]> {
        let (i, j, tx, ty) = self.grid.locate(p)?;
        let v00 = self.at(i, j, c);
        let v10 = self.at(i + 1, j, c);
        let v01 = self.at(i, j + 1, c);
        let v11 = self.at(i + 1, j + 1, c);
        let h = self.grid.h;
        Ok([
            ((1.0 - ty) * (v10 - v00) + ty * (v11 - v01)) / h,
            ((1.0 - tx) * (v01 - v00) + tx * (v11 - v10)) / h,
        ])
    }

    /// Nodal central-difference gradient (one-sided on the box boundary).
    pub fn node_gradient(&self, i: usize, j: usize, c: usize) -> [f64; 2] {
        let h = self.grid.h;
        let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * h);
        let (il, ih) = (i.saturating_sub(1), (i + 1).min(self.grid.nx));
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(self.grid.ny));
        [
            diff(self.at(il, j, c), self.at(ih, j, c), ih - il),
            diff(self.at(i, jl, c), self.at(i, jh, c), jh - jl),
        ]
    }

    /// Central-difference nodal gradients, bilinearly interpolated to `p`.
    pub fn central_gradient(&self, c: usize, p: Point) -> Result<[f64; 2]> {
        let (i, j, tx, ty) = self.grid.locate(p)?;
        let g00 = self.node_gradient(i, j, c);
        let g10 = self.node_gradient(i + 1, j, c);
        let g01 = self.node_gradient(i, j + 1, c);
        let g11 = self.node_gradient(i + 1, j + 1, c);
        let mix = |a: usize| {
            (1.0 - ty) * ((1.0 - tx) * g00[a] + tx * g10[a])
                + ty * ((1.0 - tx) * g01[a] + tx * g11[a])
        };
        Ok([mix(0), mix(1)])
    }
}

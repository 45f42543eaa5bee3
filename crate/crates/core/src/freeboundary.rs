//! Level-set extraction by marching squares, and distances to the result.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};

/// Points on the `level` line of a field with outward unit normals.
///
/// Outward means towards decreasing values, i.e. out of `{φ > level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolyline {
    pub points: Vec<Point>,
    pub normals: Vec<[f64; 2]>,
    /// Farther than `2h` from the box boundary.
    pub inside_d: Vec<bool>,
    /// Segments as pairs of point indices, in marching-squares cell order.
    pub segments: Vec<(usize, usize)>,
    /// Segments chained into polylines (point indices; closed chains repeat the first index).
    pub chains: Vec<Vec<usize>>,
}

impl BoundaryPolyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.segments
            .iter()
            .map(|&(a, b)| dist(self.points[a], self.points[b]))
            .sum()
    }

    pub fn interior_points(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.inside_d[i])
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// Edge from node (i, j) to (i + 1, j).
    H(usize, usize),
    /// Edge from node (i, j) to (i, j + 1).
    V(usize, usize),
}

/// Raw marching-squares output: crossing points and segments.
pub(crate) struct Contour {
    pub points: Vec<Point>,
    pub segments: Vec<(usize, usize)>,
}

pub(crate) fn contour(field: &Field, comp: usize, level: f64) -> Contour {
    let g = *field.grid();
    let val = |i: usize, j: usize| field.get(g.node_index(i, j), comp);
    let mut points: Vec<Point> = Vec::new();
    let mut by_edge: HashMap<EdgeKey, usize> = HashMap::new();
    let mut by_pos: HashMap<(u64, u64), usize> = HashMap::new();
    let mut segments = Vec::new();

    let mut edge_point = |key: EdgeKey| -> usize {
        if let Some(&p) = by_edge.get(&key) {
            return p;
        }
        let (a, b) = match key {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (fa, fb) = (val(a.0, a.1), val(b.0, b.1));
        let pa = g.node_point(a.0, a.1);
        let pb = g.node_point(b.0, b.1);
        let t = (level - fa) / (fb - fa);
        let p = if t <= 0.0 {
            pa
        } else if t >= 1.0 {
            pb
        } else {
            [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
        };
        let idx = *by_pos.entry((p[0].to_bits(), p[1].to_bits())).or_insert_with(|| {
            points.push(p);
            points.len() - 1
        });
        by_edge.insert(key, idx);
        idx
    };

    for cj in 0..g.ny {
        for ci in 0..g.nx {
            let f = [val(ci, cj), val(ci + 1, cj), val(ci + 1, cj + 1), val(ci, cj + 1)];
            let inside = f.map(|v| v > level);
            let case = inside
                .iter()
                .enumerate()
                .fold(0u8, |acc, (q, &b)| acc | ((b as u8) << q));
            if case == 0 || case == 15 {
                continue;
            }
            // Edges in counterclockwise order: bottom, right, top, left.
            let edges = [
                EdgeKey::H(ci, cj),
                EdgeKey::V(ci + 1, cj),
                EdgeKey::H(ci, cj + 1),
                EdgeKey::V(ci, cj),
            ];
            let crossing: Vec<usize> = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).collect();
            let pairs: Vec<(usize, usize)> = if crossing.len() == 2 {
                vec![(crossing[0], crossing[1])]
            } else {
                // Saddle: corners 0 and 2 share a state. The centre sample
                // decides whether they are connected through the cell.
                let centre_in = f.iter().sum::<f64>() * 0.25 > level;
                if centre_in == inside[0] {
                    // Diagonal 0–2 connected; cut off corners 1 and 3.
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(3, 0), (1, 2)]
                }
            };
            for (ea, eb) in pairs {
                let a = edge_point(edges[ea]);
                let b = edge_point(edges[eb]);
                if a != b {
                    segments.push((a, b));
                }
            }
        }
    }
    Contour { points, segments }
}

fn chain_segments(n: usize, segments: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, &(a, b)) in segments.iter().enumerate() {
        adj[a].push(s);
        adj[b].push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();
    // Open chains start at points of odd degree.
    let starts: Vec<usize> = (0..n)
        .filter(|&p| adj[p].len() % 2 == 1)
        .chain(0..n)
        .collect();
    for start in starts {
        while let Some(&s0) = adj[start].iter().find(|&&s| !used[s]) {
            let mut chain = vec![start];
            let mut cur = start;
            let mut s = s0;
            loop {
                used[s] = true;
                let (a, b) = segments[s];
                cur = if a == cur { b } else { a };
                chain.push(cur);
                match adj[cur].iter().find(|&&t| !used[t]) {
                    Some(&t) => s = t,
                    None => break,
                }
            }
            chains.push(chain);
        }
    }
    chains
}

/// Marching squares on `{φ = level}` with outward normals from `-∇φ`.
pub fn extract_boundary(phi: &Field, level: f64) -> Result<BoundaryPolyline> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadParams(format!("level {level} outside (0,1)")));
    }
    extract_level(phi, 0, level)
}

/// As [`extract_boundary`] for any component and level.
pub fn extract_level(field: &Field, comp: usize, level: f64) -> Result<BoundaryPolyline> {
    let g = *field.grid();
    let c = contour(field, comp, level);
    if c.segments.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    // Keep only points used by a segment.
    let mut remap = vec![usize::MAX; c.points.len()];
    let mut points = Vec::new();
    for &(a, b) in &c.segments {
        for p in [a, b] {
            if remap[p] == usize::MAX {
                remap[p] = points.len();
                points.push(c.points[p]);
            }
        }
    }
    let segments: Vec<(usize, usize)> = c.segments.iter().map(|&(a, b)| (remap[a], remap[b])).collect();
    let mut normals = Vec::with_capacity(points.len());
    for (q, &p) in points.iter().enumerate() {
        let mut n = field.central_gradient(comp, p).unwrap_or([0.0, 0.0]);
        if n[0].hypot(n[1]) < 1e-14 {
            n = field.interpolant_gradient(comp, p).unwrap_or([0.0, 0.0]);
        }
        if n[0].hypot(n[1]) < 1e-14 {
            // Perpendicular to the incident segments as a last resort.
            let mut t = [0.0, 0.0];
            for &(a, b) in segments.iter().filter(|s| s.0 == q || s.1 == q) {
                t[0] += points[b][0] - points[a][0];
                t[1] += points[b][1] - points[a][1];
            }
            n = [t[1], -t[0]];
        }
        let len = n[0].hypot(n[1]);
        normals.push(if len > 0.0 { [-n[0] / len, -n[1] / len] } else { [1.0, 0.0] });
    }
    let inside_d = points.iter().map(|&p| g.dist_to_boundary(p) > 2.0 * g.h).collect();
    let chains = chain_segments(points.len(), &segments);
    Ok(BoundaryPolyline {
        points,
        normals,
        inside_d,
        segments,
        chains,
    })
}

fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (dist(p, q), t)
}

/// Closest point on the polyline: `(distance, segment, parameter)`.
pub fn nearest_on_boundary(boundary: &BoundaryPolyline, p: Point) -> (f64, usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    for (s, &(a, b)) in boundary.segments.iter().enumerate() {
        let (d, t) = point_segment(p, boundary.points[a], boundary.points[b]);
        if d < best.0 {
            best = (d, s, t);
        }
    }
    best
}

/// Distance from every node to the polyline, by brute force.
pub fn distance_field(grid: &Grid, boundary: &BoundaryPolyline) -> Result<Field> {
    if boundary.segments.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|n| {
            let (i, j) = grid.node_ij(n);
            nearest_on_boundary(boundary, grid.node_point(i, j)).0
        })
        .collect();
    Field::from_values(*grid, 1, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(nx: usize) -> Grid {
        Grid::new([0.0, 0.0], [1.0, 1.0], nx).unwrap()
    }

    #[test]
    fn vertical_interface() {
        let g = unit(32);
        let h = g.h;
        let phi = Field::from_fn(g, |p| (0.5 + (0.5 - p[0]) / h * 0.5).clamp(0.0, 1.0));
        let b = extract_boundary(&phi, 0.5).unwrap();
        assert_eq!(b.len(), 33);
        for (p, n) in b.points.iter().zip(&b.normals) {
            assert!((p[0] - 0.5).abs() < 1e-9);
            assert!((n[0] - 1.0).abs() < 1e-12 && n[1].abs() < 1e-12);
        }
        assert!((b.length() - 1.0).abs() < 1e-12);
        assert_eq!(b.chains.len(), 1);
        let d = distance_field(&g, &b).unwrap();
        for n in 0..g.node_count() {
            let (i, j) = g.node_ij(n);
            let x = g.node_point(i, j)[0];
            assert!((d.get(n, 0) - (x - 0.5).abs()).abs() <= h / 2.0);
        }
    }

    #[test]
    fn radial_ramp() {
        let g = unit(64);
        let (c, r) = ([0.5, 0.5], 0.3);
        let phi = Field::from_fn(g, |p| (0.5 + (r - dist(p, c)) * 4.0).clamp(0.0, 1.0));
        let b = extract_boundary(&phi, 0.5).unwrap();
        for (p, n) in b.points.iter().zip(&b.normals) {
            assert!((dist(*p, c) - r).abs() < g.h);
            let radial = [(p[0] - c[0]) / dist(*p, c), (p[1] - c[1]) / dist(*p, c)];
            assert!(n[0] * radial[0] + n[1] * radial[1] > 0.99);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-9);
            assert!((phi.sample_comp(0, *p).unwrap() - 0.5).abs() <= 1e-9);
        }
        assert!((b.length() - 2.0 * PI * r).abs() / (2.0 * PI * r) < 0.02);
        assert_eq!(b.chains.len(), 1);
        let ch = &b.chains[0];
        assert_eq!(ch.first(), ch.last());
        let d = distance_field(&g, &b).unwrap();
        for n in 0..g.node_count() {
            let (i, j) = g.node_ij(n);
            let p = g.node_point(i, j);
            assert!((d.get(n, 0) - (dist(p, c) - r).abs()).abs() <= g.h);
            for (a, bb) in [(1isize, 0isize), (0, 1), (1, 1), (1, -1)] {
                let (ii, jj) = (i as isize + a, j as isize + bb);
                if ii >= 0 && jj >= 0 && (ii as usize) <= g.nx && (jj as usize) <= g.ny {
                    let m = g.node_index(ii as usize, jj as usize);
                    assert!((d.get(n, 0) - d.get(m, 0)).abs() <= g.h * 2f64.sqrt() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn constant_field_has_no_boundary() {
        let g = unit(8);
        let phi = Field::from_fn(g, |_| 1.0);
        assert!(matches!(extract_boundary(&phi, 0.5), Err(Error::EmptyBoundary)));
    }

    #[test]
    fn node_on_boundary_has_zero_distance() {
        let g = unit(16);
        let phi = Field::from_fn(g, |p| if p[0] < 0.5 { 1.0 } else if p[0] == 0.5 { 0.5 } else { 0.0 });
        let b = extract_boundary(&phi, 0.5).unwrap();
        let d = distance_field(&g, &b).unwrap();
        assert_eq!(d.get(g.node_index(8, 8), 0), 0.0);
    }

    #[test]
    fn saddle_uses_centre() {
        let g = unit(4);
        let mut phi = Field::zeros(g, 1);
        // Checkerboard corners of cell (1, 1) with a high centre average.
        phi.set(g.node_index(1, 1), 0, 1.0);
        phi.set(g.node_index(2, 2), 0, 1.0);
        phi.set(g.node_index(2, 1), 0, 0.4);
        phi.set(g.node_index(1, 2), 0, 0.4);
        let b = extract_boundary(&phi, 0.5).unwrap();
        // Centre average 0.7 joins the two high corners: one closed loop.
        assert_eq!(b.chains.len(), 1);
        phi.set(g.node_index(2, 1), 0, 0.0);
        phi.set(g.node_index(1, 2), 0, 0.0);
        let b = extract_boundary(&phi, 0.5).unwrap();
        assert_eq!(b.chains.len(), 2);
    }

    #[test]
    fn inside_flags() {
        let g = unit(32);
        let phi = Field::from_fn(g, |p| if p[1] > 0.5 { 1.0 } else { 0.0 });
        let b = extract_boundary(&phi, 0.5).unwrap();
        for (p, &f) in b.points.iter().zip(&b.inside_d) {
            assert_eq!(f, p[0] > 2.0 * g.h + 1e-12 && p[0] < 1.0 - 2.0 * g.h - 1e-12);
        }
    }
}

//! Level-set perimeters and their co-area average.

use crate::freeboundary::contour;
use crate::grid::{Field, Point};

pub const LEVELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    All,
    Ball { center: Point, radius: f64 },
    Rect { lo: Point, hi: Point },
}

impl Window {
    fn contains(&self, p: Point) -> bool {
        match *self {
            Window::All => true,
            Window::Ball { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= radius,
            Window::Rect { lo, hi } => p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterEstimate {
    pub t: f64,
    /// `s = t·i/16`, `i = 1..=16`.
    pub levels: Vec<f64>,
    pub per_level: Vec<f64>,
    /// Perimeter at the lowest level.
    pub perimeter: f64,
    /// `P(t)`: mean of `per_level`.
    pub coarea_average: f64,
}

/// Length of `{|u| = s}` inside `window` (segments counted by midpoint).
pub fn level_perimeter(field: &Field, comp: usize, s: f64, window: Window) -> f64 {
    let abs = Field::from_values(
        *field.grid(),
        1,
        (0..field.grid().node_count()).map(|n| field.get(n, comp).abs()).collect(),
    )
    .expect("same grid");
    let c = contour(&abs, 0, s);
    c.segments
        .iter()
        .filter_map(|&(a, b)| {
            let (p, q) = (c.points[a], c.points[b]);
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            window.contains(mid).then(|| (p[0] - q[0]).hypot(p[1] - q[1]))
        })
        .sum()
}

pub fn perimeter_estimate(field: &Field, comp: usize, t: f64, window: Window) -> crate::Result<PerimeterEstimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(crate::Error::BadParams(format!("level bound must be positive, got {t}")));
    }
    let levels: Vec<f64> = (1..=LEVELS).map(|i| t * i as f64 / LEVELS as f64).collect();
    let per_level: Vec<f64> = levels.iter().map(|&s| level_perimeter(field, comp, s, window)).collect();
    Ok(PerimeterEstimate {
        t,
        perimeter: per_level[0],
        coarea_average: per_level.iter().sum::<f64>() / LEVELS as f64,
        levels,
        per_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    // Marching squares on a 0/1 field follows a staircase of axis and
    // diagonal steps, which overestimates a circle by about 5-7%.
    #[test]
    fn disk_indicator() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 128).unwrap();
        let r = 0.2463;
        let chi = Field::from_fn(g, |p| if (p[0] - 0.5).hypot(p[1] - 0.5) < r { 1.0 } else { 0.0 });
        let e = perimeter_estimate(&chi, 0, 1.0, Window::All).unwrap();
        let rel = (e.perimeter - 2.0 * PI * r).abs() / (2.0 * PI * r);
        assert!(rel < 0.075, "{} vs {}: {:?}", e.perimeter, 2.0 * PI * r, e.per_level);
    }

    #[test]
    fn square_indicator() {
        let g = Grid::new([-1.0, -1.0], [3.0, 3.0], 384).unwrap();
        let chi = Field::from_fn(g, |p| {
            let inside = |x: f64| x > -1e-12 && x < 1.0 + 1e-12;
            if inside(p[0]) && inside(p[1]) { 1.0 } else { 0.0 }
        });
        let e = perimeter_estimate(&chi, 0, 1.0, Window::Rect { lo: [-0.5, -0.5], hi: [1.5, 1.5] }).unwrap();
        assert!((e.perimeter - 4.0).abs() < 8.0 * g.h, "{}", e.perimeter);
        let z = Field::zeros(g, 1);
        let e = perimeter_estimate(&z, 0, 0.5, Window::All).unwrap();
        assert_eq!((e.perimeter, e.coarea_average), (0.0, 0.0));
    }

    #[test]
    fn window_restricts() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 64).unwrap();
        let u = Field::from_fn(g, |p| (0.3 - (p[0] - 0.5).hypot(p[1] - 0.5)).max(0.0));
        let all = level_perimeter(&u, 0, 0.05, Window::All);
        assert!((all - 2.0 * PI * 0.25).abs() < 0.01, "{all}");
        let half = level_perimeter(&u, 0, 0.05, Window::Rect { lo: [0.5, 0.0], hi: [1.0, 1.0] });
        assert!((half - all / 2.0).abs() < 0.02);
    }
}

//! Coefficient data `(A, b)` of the operator `-b⁻¹ div(A ∇·)`.
//!
//! Families come from a closed-form catalog so that ellipticity, Hölder and
//! weight bounds are known analytically:
//!
//! * `identity`: `A = Id`, `b = 1`;
//! * `drift`: `A = e^{-Φ} Id`, `b = e^{-Φ}` for a potential Φ that is constant,
//!   linear or a Gaussian bump;
//! * `anisotropic`: `A = R(θ) diag(√ρ, 1/√ρ) R(θ)ᵀ`, `b = 1`, with eigenvalue
//!   ratio `ρ` and a constant or linear rotation-angle field `θ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant { value: f64 },
    Linear { grad: [f64; 2], offset: f64 },
    Gaussian { amplitude: f64, center: Point, width: f64 },
}

impl Potential {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Potential::Constant { value } => value,
            Potential::Linear { grad, offset } => grad[0] * p[0] + grad[1] * p[1] + offset,
            Potential::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amplitude * (-d2 / (width * width)).exp()
            }
        }
    }

    /// Bounds of Φ over the closed box.
    fn range(&self, grid: &Grid) -> (f64, f64) {
        let lo = grid.origin;
        let hi = grid.upper_corner();
        let corners = [lo, [hi[0], lo[1]], [lo[0], hi[1]], hi];
        match *self {
            Potential::Constant { value } => (value, value),
            Potential::Linear { .. } => corners
                .iter()
                .map(|&c| self.eval(c))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v))),
            Potential::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let near = [
                    center[0].clamp(lo[0], hi[0]),
                    center[1].clamp(lo[1], hi[1]),
                ];
                let d_near2 = (near[0] - center[0]).powi(2) + (near[1] - center[1]).powi(2);
                let d_far2 = corners
                    .iter()
                    .map(|c| (c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2))
                    .fold(0.0, f64::max);
                let a = amplitude * (-d_near2 / (width * width)).exp();
                let b = amplitude * (-d_far2 / (width * width)).exp();
                (a.min(b), a.max(b))
            }
        }
    }

    /// Upper bound of |∇Φ| over the plane.
    fn grad_bound(&self) -> f64 {
        match *self {
            Potential::Constant { .. } => 0.0,
            Potential::Linear { grad, .. } => grad[0].hypot(grad[1]),
            Potential::Gaussian {
                amplitude, width, ..
            } => amplitude.abs() * std::f64::consts::SQRT_2 * (-0.5f64).exp() / width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientKind {
    Identity,
    Drift(Potential),
    Anisotropic {
        ratio: f64,
        angle: f64,
        angle_grad: [f64; 2],
    },
}

fn num(params: &Map<String, Value>, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::BadParams(format!("missing or non-numeric `{key}`")))
}

fn pair(params: &Map<String, Value>, key: &str) -> Result<[f64; 2]> {
    let bad = || Error::BadParams(format!("`{key}` must be a pair of numbers"));
    let arr = params.get(key).and_then(Value::as_array).ok_or_else(bad)?;
    match arr.as_slice() {
        [a, b] => Ok([a.as_f64().ok_or_else(bad)?, b.as_f64().ok_or_else(bad)?]),
        _ => Err(bad()),
    }
}

fn reject_unknown(params: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::BadParams(format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

impl CoefficientKind {
    /// Resolves a catalog entry from its name and parameter map.
    pub fn from_params(kind: &str, params: &Map<String, Value>) -> Result<Self> {
        match kind {
            "identity" => {
                reject_unknown(params, &[])?;
                Ok(CoefficientKind::Identity)
            }
            "drift" => {
                let shape = params
                    .get("potential")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::BadParams("drift needs a `potential` name".into()))?;
                let pot = match shape {
                    "constant" => {
                        reject_unknown(params, &["potential", "value"])?;
                        Potential::Constant {
                            value: num(params, "value")?,
                        }
                    }
                    "linear" => {
                        reject_unknown(params, &["potential", "grad", "offset"])?;
                        Potential::Linear {
                            grad: pair(params, "grad")?,
                            offset: params.get("offset").and_then(Value::as_f64).unwrap_or(0.0),
                        }
                    }
                    "gaussian" => {
                        reject_unknown(params, &["potential", "amplitude", "center", "width"])?;
                        let width = num(params, "width")?;
                        if !(width > 0.0) {
                            return Err(Error::BadParams(format!(
                                "gaussian width must be positive, got {width}"
                            )));
                        }
                        Potential::Gaussian {
                            amplitude: num(params, "amplitude")?,
                            center: pair(params, "center")?,
                            width,
                        }
                    }
                    other => {
                        return Err(Error::BadParams(format!("unknown potential `{other}`")))
                    }
                };
                Ok(CoefficientKind::Drift(pot))
            }
            "anisotropic" => {
                reject_unknown(params, &["ratio", "angle", "angle_grad"])?;
                let ratio = num(params, "ratio")?;
                if !(ratio > 0.0) || !ratio.is_finite() {
                    return Err(Error::BadParams(format!(
                        "anisotropy ratio must be positive, got {ratio}"
                    )));
                }
                let angle = params.get("angle").and_then(Value::as_f64).unwrap_or(0.0);
                let angle_grad = if params.contains_key("angle_grad") {
                    pair(params, "angle_grad")?
                } else {
                    [0.0, 0.0]
                };
                Ok(CoefficientKind::Anisotropic {
                    ratio,
                    angle,
                    angle_grad,
                })
            }
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }

    /// `(a11, a12, a22, b)` at a point.
    pub fn eval(&self, p: Point) -> (f64, f64, f64, f64) {
        match self {
            CoefficientKind::Identity => (1.0, 0.0, 1.0, 1.0),
            CoefficientKind::Drift(pot) => {
                let w = (-pot.eval(p)).exp();
                (w, 0.0, w, w)
            }
            CoefficientKind::Anisotropic {
                ratio,
                angle,
                angle_grad,
            } => {
                let th = angle + angle_grad[0] * p[0] + angle_grad[1] * p[1];
                let s = ratio.sqrt();
                let (sn, cs) = th.sin_cos();
                let a11 = s * cs * cs + sn * sn / s;
                let a22 = s * sn * sn + cs * cs / s;
                let a12 = (s - 1.0 / s) * sn * cs;
                (a11, a12, a22, 1.0)
            }
        }
    }
}

/// Analytic constants of a coefficient family over a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    /// Ellipticity: eigenvalues of A lie in `[λ_A⁻², λ_A²]`.
    pub lam_a: f64,
    /// Hölder constant of the entries of A.
    pub c_a: f64,
    /// Hölder exponent.
    pub delta_a: f64,
    /// Weight bound: `c_b⁻¹ <= b <= c_b`.
    pub c_b: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub kind: CoefficientKind,
    pub a11: Field,
    pub a12: Field,
    pub a22: Field,
    pub b: Field,
    pub bounds: CoefficientBounds,
}

impl CoefficientField {
    pub fn new(grid: Grid, kind: CoefficientKind) -> Self {
        let mut a11 = Field::zeros(grid, 1);
        let mut a12 = Field::zeros(grid, 1);
        let mut a22 = Field::zeros(grid, 1);
        let mut b = Field::zeros(grid, 1);
        for j in 0..grid.nodes_y() {
            for i in 0..grid.nodes_x() {
                let n = grid.node_index(i, j);
                let (x11, x12, x22, xb) = kind.eval(grid.node_point(i, j));
                a11.set(n, 0, x11);
                a12.set(n, 0, x12);
                a22.set(n, 0, x22);
                b.set(n, 0, xb);
            }
        }
        let bounds = analytic_bounds(&kind, &grid);
        CoefficientField {
            kind,
            a11,
            a12,
            a22,
            b,
            bounds,
        }
    }

    pub fn identity(grid: Grid) -> Self {
        Self::new(grid, CoefficientKind::Identity)
    }

    pub fn grid(&self) -> &Grid {
        self.b.grid()
    }

    /// Entries of A, bilinearly interpolated.
    pub fn matrix_at(&self, p: Point) -> Result<[f64; 3]> {
        Ok([
            self.a11.sample_comp(0, p)?,
            self.a12.sample_comp(0, p)?,
            self.a22.sample_comp(0, p)?,
        ])
    }

    pub fn weight_at(&self, p: Point) -> Result<f64> {
        self.b.sample_comp(0, p)
    }
}

/// Builds the coefficient field for a named catalog family.
pub fn make_coefficients(
    grid: Grid,
    kind: &str,
    params: &Map<String, Value>,
) -> Result<CoefficientField> {
    Ok(CoefficientField::new(grid, CoefficientKind::from_params(kind, params)?))
}

fn analytic_bounds(kind: &CoefficientKind, grid: &Grid) -> CoefficientBounds {
    match kind {
        CoefficientKind::Identity => CoefficientBounds {
            lam_a: 1.0,
            c_a: 0.0,
            delta_a: 1.0,
            c_b: 1.0,
        },
        CoefficientKind::Drift(pot) => {
            let (lo, hi) = pot.range(grid);
            CoefficientBounds {
                lam_a: 1f64.max((hi / 2.0).exp()).max((-lo / 2.0).exp()),
                c_a: pot.grad_bound() * (-lo).exp(),
                delta_a: 1.0,
                c_b: 1f64.max(hi.exp()).max((-lo).exp()),
            }
        }
        CoefficientKind::Anisotropic {
            ratio, angle_grad, ..
        } => {
            let s = ratio.sqrt();
            CoefficientBounds {
                lam_a: ratio.max(1.0 / ratio).powf(0.25),
                c_a: (s - 1.0 / s).abs() * angle_grad[0].hypot(angle_grad[1]),
                delta_a: 1.0,
                c_b: 1.0,
            }
        }
    }
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(a11: f64, a12: f64, a22: f64) -> (f64, f64) {
    let mean = 0.5 * (a11 + a22);
    let rad = (0.5 * (a11 - a22)).hypot(a12);
    (mean - rad, mean + rad)
}

/// Principal square root of an SPD 2×2 matrix: `S = (A + √det I) / √(tr A + 2√det)`.
pub fn spd_sqrt(a11: f64, a12: f64, a22: f64) -> Result<[f64; 3]> {
    let det = a11 * a22 - a12 * a12;
    if !(a11 > 0.0 && a22 > 0.0 && det > 0.0) || !det.is_finite() {
        return Err(Error::NotSpd(format!("[[{a11}, {a12}], [{a12}, {a22}]]")));
    }
    let s = det.sqrt();
    let t = (a11 + a22 + 2.0 * s).sqrt();
    Ok([(a11 + s) / t, a12 / t, (a22 + s) / t])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub min_eig_a: f64,
    pub max_eig_a: f64,
    pub lam_a_estimate: f64,
    pub holder_quotient: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub pairs: usize,
    pub violations: Vec<String>,
}

/// Empirical check of the ellipticity, Hölder and weight hypotheses.
pub fn validate_coefficients(cf: &CoefficientField, pairs: usize, seed: u64) -> ValidationReport {
    let grid = *cf.grid();
    let nodes = grid.node_count();
    let bounds = cf.bounds;
    let mut violations = Vec::new();
    let (mut min_eig, mut max_eig) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lam_est: f64 = 1.0;
    let (mut b_min, mut b_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let lo = bounds.lam_a.powi(-2) * (1.0 - 1e-12);
    let hi = bounds.lam_a.powi(2) * (1.0 + 1e-12);
    for n in 0..nodes {
        let (a11, a12, a22) = (cf.a11.get(n, 0), cf.a12.get(n, 0), cf.a22.get(n, 0));
        let (e0, e1) = sym_eigenvalues(a11, a12, a22);
        min_eig = min_eig.min(e0);
        max_eig = max_eig.max(e1);
        if !(a11 > 0.0 && a11 * a22 - a12 * a12 > 0.0) {
            violations.push(format!("A not SPD at node {n}"));
        } else {
            lam_est = lam_est.max(e1.max(1.0 / e0).sqrt());
            if e0 < lo || e1 > hi {
                violations.push(format!(
                    "eigenvalues ({e0}, {e1}) of A at node {n} outside [λ_A⁻², λ_A²]"
                ));
            }
        }
        let b = cf.b.get(n, 0);
        b_min = b_min.min(b);
        b_max = b_max.max(b);
        if b < (1.0 - 1e-12) / bounds.c_b || b > bounds.c_b * (1.0 + 1e-12) {
            violations.push(format!("b = {b} at node {n} outside [c_b⁻¹, c_b]"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotient: f64 = 0.0;
    for _ in 0..pairs {
        let (p, q) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
        if p == q {
            continue;
        }
        let (ip, jp) = grid.node_ij(p);
        let (iq, jq) = grid.node_ij(q);
        let xp = grid.node_point(ip, jp);
        let xq = grid.node_point(iq, jq);
        let dist = (xp[0] - xq[0]).hypot(xp[1] - xq[1]).powf(bounds.delta_a);
        for f in [&cf.a11, &cf.a12, &cf.a22] {
            quotient = quotient.max((f.get(p, 0) - f.get(q, 0)).abs() / dist);
        }
    }
    if quotient > bounds.c_a * (1.0 + 1e-9) + 1e-12 {
        violations.push(format!(
            "Hölder quotient {quotient} exceeds c_A = {}",
            bounds.c_a
        ));
    }
    ValidationReport {
        min_eig_a: min_eig,
        max_eig_a: max_eig,
        lam_a_estimate: lam_est,
        holder_quotient: quotient,
        b_min,
        b_max,
        pairs,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn unit(nx: usize) -> Grid {
        Grid::new([0.0, 0.0], [1.0, 1.0], nx).unwrap()
    }

    fn params(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn identity_family() {
        let cf = make_coefficients(unit(8), "identity", &Map::new()).unwrap();
        assert!(cf.a11.values().iter().all(|&v| v == 1.0));
        assert!(cf.a12.values().iter().all(|&v| v == 0.0));
        assert!(cf.b.values().iter().all(|&v| v == 1.0));
        assert_eq!(cf.bounds.lam_a, 1.0);
    }

    #[test]
    fn zero_drift_is_identity() {
        let g = unit(8);
        let p = params(json!({"potential": "constant", "value": 0.0}));
        let cf = make_coefficients(g, "drift", &p).unwrap();
        let id = CoefficientField::identity(g);
        assert_eq!(cf.a11, id.a11);
        assert_eq!(cf.a12, id.a12);
        assert_eq!(cf.a22, id.a22);
        assert_eq!(cf.b, id.b);
    }

    #[test]
    fn linear_drift_at_ln2() {
        let p = params(json!({"potential": "linear", "grad": [1.0, 0.0]}));
        let kind = CoefficientKind::from_params("drift", &p).unwrap();
        let (a11, a12, a22, b) = kind.eval([2f64.ln(), 0.0]);
        assert!((a11 - 0.5).abs() < 1e-15);
        assert_eq!(a12, 0.0);
        assert!((a22 - 0.5).abs() < 1e-15);
        assert!((b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_kind_and_params() {
        assert!(matches!(
            make_coefficients(unit(8), "isotropic", &Map::new()),
            Err(Error::UnknownKind(_))
        ));
        let p = params(json!({"ratio": 0.0}));
        assert!(matches!(
            make_coefficients(unit(8), "anisotropic", &p),
            Err(Error::BadParams(_))
        ));
        let p = params(json!({"ratio": -2.0}));
        assert!(matches!(
            make_coefficients(unit(8), "anisotropic", &p),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn validation_identity() {
        let r = validate_coefficients(&CoefficientField::identity(unit(8)), 500, 1);
        assert_eq!(r.lam_a_estimate, 1.0);
        assert_eq!(r.holder_quotient, 0.0);
        assert_eq!((r.b_min, r.b_max), (1.0, 1.0));
        assert!(r.violations.is_empty());
    }

    #[test]
    fn validation_constant_anisotropy() {
        // diag(4, 1/4) is ratio 16 at angle 0.
        let p = params(json!({"ratio": 16.0}));
        let cf = make_coefficients(unit(8), "anisotropic", &p).unwrap();
        assert!((cf.a11.get(0, 0) - 4.0).abs() < 1e-14);
        assert!((cf.a22.get(0, 0) - 0.25).abs() < 1e-14);
        let r = validate_coefficients(&cf, 500, 1);
        assert!((r.lam_a_estimate - 2.0).abs() < 1e-12);
        assert_eq!(r.holder_quotient, 0.0);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn validation_linear_drift_lipschitz() {
        let p = params(json!({"potential": "linear", "grad": [1.0, 0.0]}));
        let cf = make_coefficients(unit(32), "drift", &p).unwrap();
        let r = validate_coefficients(&cf, 4000, 7);
        assert!(r.holder_quotient <= 1.0, "{}", r.holder_quotient);
        assert!(r.holder_quotient > 0.3);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn catalog_families_validate_clean() {
        let g = unit(24);
        let families = [
            ("identity", json!({})),
            ("drift", json!({"potential": "constant", "value": -0.7})),
            ("drift", json!({"potential": "linear", "grad": [0.8, -1.5], "offset": 0.2})),
            ("drift", json!({"potential": "gaussian", "amplitude": 1.2, "center": [0.3, 0.6], "width": 0.25})),
            ("drift", json!({"potential": "gaussian", "amplitude": -0.9, "center": [1.4, 0.5], "width": 0.4})),
            ("anisotropic", json!({"ratio": 3.0, "angle": 0.4})),
            ("anisotropic", json!({"ratio": 0.2, "angle": 0.1, "angle_grad": [2.0, -1.0]})),
        ];
        for (kind, p) in families {
            let cf = make_coefficients(g, kind, &params(p.clone())).unwrap();
            let r = validate_coefficients(&cf, 3000, 11);
            assert!(r.violations.is_empty(), "{kind} {p}: {:?}", r.violations);
            if let CoefficientKind::Drift(_) = cf.kind {
                for n in 0..g.node_count() {
                    assert_eq!(cf.a11.get(n, 0), cf.b.get(n, 0));
                    assert_eq!(cf.a22.get(n, 0), cf.b.get(n, 0));
                }
            }
        }
    }

    #[test]
    fn spd_sqrt_examples() {
        assert_eq!(spd_sqrt(1.0, 0.0, 1.0).unwrap(), [1.0, 0.0, 1.0]);
        let s = spd_sqrt(4.0, 0.0, 9.0).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-15 && s[1] == 0.0 && (s[2] - 3.0).abs() < 1e-15);
        // det = 3, trace = 4: S = (A + √3 I)/√(4 + 2√3).
        let s = spd_sqrt(2.0, 1.0, 2.0).unwrap();
        let t = (4.0 + 2.0 * 3f64.sqrt()).sqrt();
        let d = (2.0 + 3f64.sqrt()) / t;
        let o = 1.0 / t;
        assert!((s[0] - d).abs() < 1e-15 && (s[1] - o).abs() < 1e-15 && (s[2] - d).abs() < 1e-15);
        assert!((s[0] - 1.3660).abs() < 5e-5 && (s[1] - 0.3660).abs() < 5e-5);
        // S² = A
        assert!((s[0] * s[0] + s[1] * s[1] - 2.0).abs() < 1e-14);
        assert!((s[0] * s[1] + s[1] * s[2] - 1.0).abs() < 1e-14);
        assert!(matches!(spd_sqrt(1.0, 2.0, 1.0), Err(Error::NotSpd(_))));
    }

    #[test]
    fn spd_sqrt_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let cond: f64 = 10f64.powf(rng.gen_range(0.0..4.0));
            let scale: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (e0, e1) = (scale, scale * cond);
            let (sn, cs) = th.sin_cos();
            let a11 = e0 * cs * cs + e1 * sn * sn;
            let a22 = e0 * sn * sn + e1 * cs * cs;
            let a12 = (e1 - e0) * sn * cs;
            let s = spd_sqrt(a11, a12, a22).unwrap();
            let r11 = s[0] * s[0] + s[1] * s[1] - a11;
            let r12 = s[0] * s[1] + s[1] * s[2] - a12;
            let r22 = s[1] * s[1] + s[2] * s[2] - a22;
            let err = (r11 * r11 + 2.0 * r12 * r12 + r22 * r22).sqrt();
            let norm = (a11 * a11 + 2.0 * a12 * a12 + a22 * a22).sqrt();
            assert!(err <= 1e-12 * norm, "cond {cond}: {err} vs {norm}");
        }
    }
}

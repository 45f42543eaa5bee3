use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::coeffs::{CoefficientField, CoefficientKind};
use crate::error::{Error, Result};
use crate::grid::{Grid, Point};
use crate::optimizer::{OptimizeOptions, Phi0};

use super::Json;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "box")]
    bbox: RawBox,
    nx: usize,
    coefficients: RawCoefficients,
    k: usize,
    #[serde(rename = "Lambda")]
    lambda: f64,
    #[serde(default)]
    eps: Option<RawEps>,
    #[serde(default)]
    phi0: Option<RawPhi0>,
    #[serde(default)]
    optimizer: Option<RawOptimizer>,
    #[serde(default)]
    diagnostics: Option<RawDiagnostics>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    origin: [f64; 2],
    extent: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    kind: String,
    #[serde(default)]
    params: Map<String, Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEps {
    eps0: Option<f64>,
    eps_min: Option<f64>,
    factor: Option<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPhi0 {
    Constant { value: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    TwoDisks { centers: [[f64; 2]; 2], radii: [f64; 2] },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    tol: Option<f64>,
    max_iters: Option<usize>,
    step0: Option<f64>,
    seed: Option<u64>,
    eig_tol: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    points: Option<usize>,
    delta_tol: Option<f64>,
    quad: Option<[usize; 2]>,
    d_in_cells: Option<f64>,
    weiss_radii: Option<usize>,
    weiss_r_max: Option<f64>,
    blowup_cells: Option<Vec<f64>>,
    ref_resolution: Option<usize>,
    harnack_cells: Option<f64>,
    theta_radii: Option<usize>,
    level_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsConfig {
    pub eps0: f64,
    pub eps_min: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub step0: f64,
    pub seed: u64,
    pub eig_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Boundary points sampled by `diagnose`.
    pub points: usize,
    pub delta_tol: f64,
    pub quad: (usize, usize),
    /// Inward probe offset of the optimality residual, in cells.
    pub d_in_cells: f64,
    /// Number of geometric Weiss radii from `2h`.
    pub weiss_radii: usize,
    /// Largest Weiss radius; `None` means `16h`, always capped by the chart.
    pub weiss_r_max: Option<f64>,
    /// Blow-up radii in cells, descending.
    pub blowup_cells: Vec<f64>,
    pub ref_resolution: usize,
    /// Radius of the quotient audit ball, in cells.
    pub harnack_cells: f64,
    pub theta_radii: usize,
    /// Perimeter level bound as a fraction of `‖u₁‖∞`.
    pub level_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub origin: Point,
    pub extent: [f64; 2],
    pub nx: usize,
    pub kind: String,
    pub params: Map<String, Value>,
    pub k: usize,
    pub lambda: f64,
    pub eps: EpsConfig,
    pub phi0: Phi0,
    pub optimizer: OptimizerConfig,
    pub diagnostics: DiagnosticsConfig,
    /// `path = value` for every default that was filled in.
    pub defaults_applied: Vec<String>,
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: Copy + std::fmt::Debug>(&mut self, v: Option<T>, path: &str, default: T) -> T {
        v.unwrap_or_else(|| {
            self.0.push(format!("{path} = {default:?}"));
            default
        })
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = match serde_path_to_error::deserialize(de) {
        Ok(r) => r,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => Error::schema(path, inner.to_string()),
                _ => Error::Parse(inner.to_string()),
            });
        }
    };
    let range = |ok: bool, path: &str, msg: String| if ok { Ok(()) } else { Err(Error::schema(path, msg)) };

    range(
        raw.bbox.extent.iter().all(|v| *v > 0.0 && v.is_finite()) && raw.bbox.origin.iter().all(|v| v.is_finite()),
        "box",
        "extent must be positive and finite".into(),
    )?;
    range(raw.nx >= 4 && raw.nx <= 4096, "nx", format!("{} outside [4, 4096]", raw.nx))?;
    let grid = Grid::new(raw.bbox.origin, raw.bbox.extent, raw.nx).map_err(|e| Error::schema("box", e.to_string()))?;
    let h2 = grid.h * grid.h;
    range(raw.k >= 1 && raw.k <= 16, "k", format!("{} outside [1, 16]", raw.k))?;
    range(
        raw.lambda >= 0.0 && raw.lambda.is_finite(),
        "Lambda",
        format!("{} must be finite and nonnegative", raw.lambda),
    )?;
    CoefficientKind::from_params(&raw.coefficients.kind, &raw.coefficients.params).map_err(|e| match e {
        Error::UnknownKind(k) => Error::schema("coefficients.kind", format!("unknown kind `{k}`")),
        other => Error::schema("coefficients.params", other.to_string()),
    })?;

    let mut d = Defaults(Vec::new());
    let e = raw.eps.unwrap_or_default();
    let eps = EpsConfig {
        eps0: d.take(e.eps0, "eps.eps0", 16.0 * h2),
        eps_min: d.take(e.eps_min, "eps.eps_min", h2 / 16.0),
        factor: d.take(e.factor, "eps.factor", 0.25),
    };
    range(eps.eps_min > 0.0 && eps.eps_min.is_finite(), "eps.eps_min", format!("{} must be positive", eps.eps_min))?;
    range(eps.eps0 >= eps.eps_min && eps.eps0.is_finite(), "eps.eps0", format!("{} must be at least eps_min", eps.eps0))?;
    range(eps.factor > 0.0 && eps.factor < 1.0, "eps.factor", format!("{} outside (0, 1)", eps.factor))?;

    let phi0 = match raw.phi0 {
        Some(RawPhi0::Constant { value }) => Phi0::Constant { value },
        Some(RawPhi0::Disk { center, radius }) => Phi0::Disk { center, radius },
        Some(RawPhi0::Annulus { center, inner, outer }) => Phi0::Annulus { center, inner, outer },
        Some(RawPhi0::TwoDisks { centers, radii }) => Phi0::TwoDisks { centers, radii },
        None => {
            let c = [
                raw.bbox.origin[0] + 0.5 * raw.bbox.extent[0],
                raw.bbox.origin[1] + 0.5 * raw.bbox.extent[1],
            ];
            let r = 0.35 * raw.bbox.extent[0].min(raw.bbox.extent[1]);
            d.0.push(format!("phi0 = disk centre {c:?} radius {r:?}"));
            Phi0::Disk { center: c, radius: r }
        }
    };
    phi0.build(&grid).map_err(|e| Error::schema("phi0", e.to_string()))?;

    let o = raw.optimizer.unwrap_or_default();
    let optimizer = OptimizerConfig {
        tol: d.take(o.tol, "optimizer.tol", 1e-7),
        max_iters: d.take(o.max_iters, "optimizer.max_iters", 200),
        step0: d.take(o.step0, "optimizer.step0", 1.0),
        seed: d.take(o.seed, "optimizer.seed", 0),
        eig_tol: d.take(o.eig_tol, "optimizer.eig_tol", 1e-9),
    };
    range(optimizer.tol > 0.0 && optimizer.tol < 1.0, "optimizer.tol", format!("{} outside (0, 1)", optimizer.tol))?;
    range(optimizer.max_iters >= 1, "optimizer.max_iters", "must be at least 1".into())?;
    range(optimizer.step0 > 0.0 && optimizer.step0.is_finite(), "optimizer.step0", format!("{} must be positive", optimizer.step0))?;
    range(
        optimizer.eig_tol > 0.0 && optimizer.eig_tol < 1e-2,
        "optimizer.eig_tol",
        format!("{} outside (0, 1e-2)", optimizer.eig_tol),
    )?;

    let g = raw.diagnostics.unwrap_or_default();
    let quad = d.take(g.quad, "diagnostics.quad", [64, 256]);
    let blowup_cells = match g.blowup_cells {
        Some(v) => v,
        None => {
            d.0.push("diagnostics.blowup_cells = [8.0, 4.0, 2.0]".into());
            vec![8.0, 4.0, 2.0]
        }
    };
    let diagnostics = DiagnosticsConfig {
        points: d.take(g.points, "diagnostics.points", 20),
        delta_tol: d.take(g.delta_tol, "diagnostics.delta_tol", 0.1),
        quad: (quad[0], quad[1]),
        d_in_cells: d.take(g.d_in_cells, "diagnostics.d_in_cells", 2.0),
        weiss_radii: d.take(g.weiss_radii, "diagnostics.weiss_radii", 8),
        weiss_r_max: g.weiss_r_max,
        blowup_cells,
        ref_resolution: d.take(g.ref_resolution, "diagnostics.ref_resolution", 16),
        harnack_cells: d.take(g.harnack_cells, "diagnostics.harnack_cells", 8.0),
        theta_radii: d.take(g.theta_radii, "diagnostics.theta_radii", 5),
        level_fraction: d.take(g.level_fraction, "diagnostics.level_fraction", 0.1),
    };
    if g.weiss_r_max.is_none() {
        d.0.push("diagnostics.weiss_r_max = 16h".into());
    }
    let dg = &diagnostics;
    range(dg.points >= 1, "diagnostics.points", "must be at least 1".into())?;
    range(
        dg.delta_tol > 0.0 && dg.delta_tol < 0.25,
        "diagnostics.delta_tol",
        format!("{} outside (0, 1/4)", dg.delta_tol),
    )?;
    range(dg.quad.0 >= 16 && dg.quad.1 >= 64, "diagnostics.quad", format!("{:?} below (16, 64)", dg.quad))?;
    range(
        (1.0..=4.0).contains(&dg.d_in_cells),
        "diagnostics.d_in_cells",
        format!("{} outside [1, 4]", dg.d_in_cells),
    )?;
    range(dg.weiss_radii >= 1, "diagnostics.weiss_radii", "must be at least 1".into())?;
    if let Some(r) = dg.weiss_r_max {
        range(r >= 2.0 * grid.h, "diagnostics.weiss_r_max", format!("{r} below two cells"))?;
    }
    range(
        !dg.blowup_cells.is_empty()
            && dg.blowup_cells.windows(2).all(|w| w[1] < w[0])
            && dg.blowup_cells.iter().all(|&c| c >= 2.0),
        "diagnostics.blowup_cells",
        "must be strictly descending and at least 2".into(),
    )?;
    range(dg.ref_resolution >= 4, "diagnostics.ref_resolution", "must be at least 4".into())?;
    range(dg.harnack_cells >= 2.0, "diagnostics.harnack_cells", "must be at least 2".into())?;
    range(dg.theta_radii >= 1, "diagnostics.theta_radii", "must be at least 1".into())?;
    range(
        dg.level_fraction > 0.0 && dg.level_fraction <= 1.0,
        "diagnostics.level_fraction",
        format!("{} outside (0, 1]", dg.level_fraction),
    )?;

    Ok(RunConfig {
        origin: raw.bbox.origin,
        extent: raw.bbox.extent,
        nx: raw.nx,
        kind: raw.coefficients.kind,
        params: raw.coefficients.params,
        k: raw.k,
        lambda: raw.lambda,
        eps,
        phi0,
        optimizer,
        diagnostics,
        defaults_applied: d.0,
    })
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.origin, self.extent, self.nx)
    }

    pub fn coefficients(&self) -> Result<CoefficientField> {
        let kind = CoefficientKind::from_params(&self.kind, &self.params)?;
        Ok(CoefficientField::new(self.grid()?, kind))
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions {
            k: self.k,
            lambda: self.lambda,
            eps0: self.eps.eps0,
            eps_min: self.eps.eps_min,
            eps_factor: self.eps.factor,
            phi0: self.phi0.clone(),
            step0: self.optimizer.step0,
            tol: self.optimizer.tol,
            max_iters: self.optimizer.max_iters,
            eig_tol: self.optimizer.eig_tol,
            seed: self.optimizer.seed,
        }
    }

    /// The fully resolved configuration, readable by [`parse_config`].
    pub fn to_json(&self) -> Json {
        let phi0 = match &self.phi0 {
            Phi0::Constant { value } => Json::obj([("kind", "constant".into()), ("value", Json::from(*value))]),
            Phi0::Disk { center, radius } => Json::obj([
                ("kind", "disk".into()),
                ("center", Json::from(*center)),
                ("radius", Json::from(*radius)),
            ]),
            Phi0::Annulus { center, inner, outer } => Json::obj([
                ("kind", "annulus".into()),
                ("center", Json::from(*center)),
                ("inner", Json::from(*inner)),
                ("outer", Json::from(*outer)),
            ]),
            Phi0::TwoDisks { centers, radii } => Json::obj([
                ("kind", "two_disks".into()),
                ("centers", Json::arr(centers.iter().map(|c| Json::from(*c)))),
                ("radii", Json::from(radii.to_vec())),
            ]),
        };
        let d = &self.diagnostics;
        let mut diagnostics = Json::obj([
            ("points", Json::from(d.points)),
            ("delta_tol", d.delta_tol.into()),
            ("quad", Json::from(vec![d.quad.0, d.quad.1])),
            ("d_in_cells", d.d_in_cells.into()),
            ("weiss_radii", d.weiss_radii.into()),
            ("blowup_cells", d.blowup_cells.clone().into()),
            ("ref_resolution", d.ref_resolution.into()),
            ("harnack_cells", d.harnack_cells.into()),
            ("theta_radii", d.theta_radii.into()),
            ("level_fraction", d.level_fraction.into()),
        ]);
        if let Some(r) = d.weiss_r_max {
            diagnostics.insert("weiss_r_max", r.into());
        }
        Json::obj([
            (
                "box",
                Json::obj([("origin", Json::from(self.origin)), ("extent", Json::from(self.extent))]),
            ),
            ("nx", self.nx.into()),
            (
                "coefficients",
                Json::obj([("kind", Json::from(self.kind.as_str())), ("params", value_to_json(&Value::Object(self.params.clone())))]),
            ),
            ("k", self.k.into()),
            ("Lambda", self.lambda.into()),
            (
                "eps",
                Json::obj([
                    ("eps0", Json::from(self.eps.eps0)),
                    ("eps_min", self.eps.eps_min.into()),
                    ("factor", self.eps.factor.into()),
                ]),
            ),
            ("phi0", phi0),
            (
                "optimizer",
                Json::obj([
                    ("tol", Json::from(self.optimizer.tol)),
                    ("max_iters", self.optimizer.max_iters.into()),
                    ("step0", self.optimizer.step0.into()),
                    ("seed", self.optimizer.seed.into()),
                    ("eig_tol", self.optimizer.eig_tol.into()),
                ]),
            ),
            ("diagnostics", diagnostics),
        ])
    }
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Bool(b) => Json::Bool(*b),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Json::Int(i),
            None => Json::Num(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => Json::Str(s.clone()),
        Value::Array(a) => Json::Arr(a.iter().map(value_to_json).collect()),
        Value::Object(m) => Json::Obj(m.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "box": {"origin": [0, 0], "extent": [1, 1]},
        "nx": 64,
        "coefficients": {"kind": "identity"},
        "k": 1,
        "Lambda": 500
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        let h2 = (1.0f64 / 64.0).powi(2);
        assert_eq!(c.eps.eps0, 16.0 * h2);
        assert_eq!(c.eps.eps_min, h2 / 16.0);
        assert_eq!(c.diagnostics.delta_tol, 0.1);
        assert_eq!(c.diagnostics.quad, (64, 256));
        assert!(matches!(c.phi0, Phi0::Disk { radius, .. } if (radius - 0.35).abs() < 1e-15));
        assert!(c.defaults_applied.iter().any(|s| s.starts_with("eps.eps_min")));
        assert!(c.defaults_applied.iter().any(|s| s.starts_with("diagnostics.delta_tol")));
        assert!(c.defaults_applied.iter().any(|s| s.starts_with("optimizer.seed")));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        let back = parse_config(&c.to_json().render_plain()).unwrap();
        assert_eq!(back.eps, c.eps);
        assert_eq!(back.phi0, c.phi0);
        assert_eq!(back.diagnostics, c.diagnostics);
        assert!(back.defaults_applied.iter().all(|s| s.contains("weiss_r_max")));
    }

    #[test]
    fn schema_errors_name_paths() {
        let neg = MINIMAL.replace("\"Lambda\": 500", "\"Lambda\": -1");
        assert!(matches!(parse_config(&neg), Err(Error::Schema { path, .. }) if path == "Lambda"));
        let typo = MINIMAL.replace("\"Lambda\": 500", "\"Lambda\": 500, \"lamda\": 1");
        match parse_config(&typo) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("lamda"), "{message}"),
            other => panic!("{other:?}"),
        }
        let missing = MINIMAL.replace("\"k\": 1,", "");
        assert!(matches!(parse_config(&missing), Err(Error::Schema { .. })));
        assert!(matches!(parse_config("{ not json"), Err(Error::Parse(_))));
        let kind = MINIMAL.replace("identity", "magic");
        assert!(matches!(parse_config(&kind), Err(Error::Schema { path, .. }) if path == "coefficients.kind"));
        let nested = MINIMAL.replace("\"k\": 1,", "\"k\": 1, \"diagnostics\": {\"delta_tol\": 0.3},");
        assert!(matches!(parse_config(&nested), Err(Error::Schema { path, .. }) if path == "diagnostics.delta_tol"));
        let inner = MINIMAL.replace("\"k\": 1,", "\"k\": 1, \"eps\": {\"eps_mn\": 1},");
        match parse_config(&inner) {
            Err(Error::Schema { path, message }) => assert!(path.starts_with("eps") && message.contains("eps_mn")),
            other => panic!("{other:?}"),
        }
    }
}

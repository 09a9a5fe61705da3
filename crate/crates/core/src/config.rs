//! Experiment configuration: a flat `key = value` text format with dotted
//! section names, plus named presets.
//!
//! ```text
//! # comment
//! preset = expanding_torus_reduced   # optional base, must come first
//! surface.kind = expanding_torus     # stationary_sphere | expanding_sphere | expanding_torus | shrinking_torus
//! surface.radius = 1.0               # stationary_sphere only
//! mesh.kind = torus                  # torus | icosphere
//! mesh.n_theta = 36
//! mesh.n_phi = 21
//! mesh.level = 4                     # icosphere only
//! model.epsilon = 0.1
//! model.theta = 0.4
//! time.tau = 5e-4
//! time.t_end = 0.6
//! initial = torus_paper              # torus_paper | sphere_paper | constant(c) | expr(<expression>)
//! output.dir = out
//! output.snapshot_every = 100        # 0 disables snapshots
//! newton.tol = 1e-9
//! newton.max_iters = 30
//! newton.max_halvings = 20
//! newton.margin = 1e-9
//! newton.delta_schedule = 1e-2, 1e-3, 1e-4
//! seed = 0
//! ```
//!
//! Later keys override earlier ones; unknown keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::FeFunction;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::SurfaceFamily;
use crate::mesh::{make_icosphere, make_torus_mesh, SurfaceMesh};
use crate::operators::interpolate;
use crate::potential::PotentialParams;
use crate::solver::SchemeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshSpec {
    Icosphere { level: u32 },
    Torus { n_theta: usize, n_phi: usize },
}

impl MeshSpec {
    pub fn build(&self, family: SurfaceFamily) -> Result<SurfaceMesh> {
        match *self {
            MeshSpec::Icosphere { level } => make_icosphere(level, family),
            MeshSpec::Torus { n_theta, n_phi } => make_torus_mesh(n_theta, n_phi, family),
        }
    }
}

impl fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSpec::Icosphere { level } => write!(f, "icosphere level {level}"),
            MeshSpec::Torus { n_theta, n_phi } => write!(f, "torus {n_theta}x{n_phi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `0.9 x cos(π y / 2)`
    TorusPaper,
    /// `0.5 x`
    SpherePaper,
    Constant(f64),
    Expression(Expr),
}

impl InitialData {
    pub fn eval(&self, x: &crate::geometry::Point3) -> f64 {
        match self {
            InitialData::TorusPaper => 0.9 * x.x * (std::f64::consts::PI * x.y / 2.0).cos(),
            InitialData::SpherePaper => 0.5 * x.x,
            InitialData::Constant(c) => *c,
            InitialData::Expression(e) => e.eval(x),
        }
    }

    pub fn interpolate(&self, mesh: &SurfaceMesh) -> Result<FeFunction> {
        interpolate(mesh, |x| self.eval(x))
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::TorusPaper => f.write_str("torus_paper"),
            InitialData::SpherePaper => f.write_str("sphere_paper"),
            InitialData::Constant(c) => write!(f, "constant({c:?})"),
            InitialData::Expression(e) => write!(f, "expr({e})"),
        }
    }
}

impl FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        if s == "torus_paper" {
            Ok(InitialData::TorusPaper)
        } else if s == "sphere_paper" {
            Ok(InitialData::SpherePaper)
        } else if let Some(c) = inner("constant(") {
            Ok(InitialData::Constant(parse_num("initial", c)?))
        } else if let Some(e) = inner("expr(") {
            Ok(InitialData::Expression(e.parse()?))
        } else {
            Err(Error::Config(format!("unknown initial data `{s}`")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: SurfaceFamily,
    pub mesh: MeshSpec,
    pub epsilon: f64,
    pub theta: f64,
    pub tau: f64,
    pub t_end: f64,
    pub initial: InitialData,
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub damping_max_halvings: usize,
    pub feasibility_margin: f64,
    pub delta_schedule: Vec<f64>,
    pub seed: u64,
}

pub const PRESETS: &[&str] = &[
    "expanding_torus_paper",
    "shrinking_torus_paper",
    "expanding_sphere_paper",
    "expanding_torus_reduced",
    "shrinking_torus_reduced",
    "expanding_sphere_desk",
    "stationary_sphere_demo",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", v.trim())))
}

impl ExperimentConfig {
    fn base(family: SurfaceFamily, mesh: MeshSpec, theta: f64, tau: f64, t_end: f64, initial: InitialData) -> Self {
        let defaults = SchemeParams::new(PotentialParams { theta, epsilon: 0.1, delta: None }, tau, t_end);
        ExperimentConfig {
            family,
            mesh,
            epsilon: 0.1,
            theta,
            tau,
            t_end,
            initial,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
            newton_tol: defaults.newton_tol,
            newton_max_iters: defaults.newton_max_iters,
            damping_max_halvings: defaults.damping_max_halvings,
            feasibility_margin: defaults.feasibility_margin,
            delta_schedule: defaults.delta_schedule,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        use InitialData::*;
        use SurfaceFamily::*;
        let paper_torus = MeshSpec::Torus { n_theta: 64, n_phi: 47 };
        let reduced_torus = MeshSpec::Torus { n_theta: 36, n_phi: 21 };
        let mut c = match name {
            "expanding_torus_paper" => Self::base(ExpandingTorus, paper_torus, 0.4, 5e-5, 0.6, TorusPaper),
            "shrinking_torus_paper" => Self::base(ShrinkingTorus, paper_torus, 0.4, 5e-5, 0.6, TorusPaper),
            "expanding_sphere_paper" => {
                Self::base(ExpandingSphere, MeshSpec::Icosphere { level: 6 }, 0.5, 1e-5, 0.1, SpherePaper)
            }
            "expanding_torus_reduced" => Self::base(ExpandingTorus, reduced_torus, 0.4, 5e-4, 0.6, TorusPaper),
            "shrinking_torus_reduced" => Self::base(ShrinkingTorus, reduced_torus, 0.4, 5e-4, 0.6, TorusPaper),
            "expanding_sphere_desk" => {
                Self::base(ExpandingSphere, MeshSpec::Icosphere { level: 4 }, 0.5, 1e-4, 0.1, SpherePaper)
            }
            "stationary_sphere_demo" => Self::base(
                SurfaceFamily::unit_sphere(),
                MeshSpec::Icosphere { level: 3 },
                0.4,
                1e-3,
                0.05,
                Expression("0.3*x*y + 0.2*z".parse()?),
            ),
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset `{name}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        c.snapshot_every = (c.t_end / c.tau / 10.0).round().max(1.0) as usize;
        Ok(c)
    }

    /// Parses the text format, starting from `base` when given.
    pub fn parse(text: &str, base: Option<ExperimentConfig>) -> Result<Self> {
        let mut cfg = base;
        let mut surface_kind: Option<String> = None;
        let mut radius: Option<f64> = None;
        let mut mesh_kind: Option<String> = None;
        let (mut level, mut n_theta, mut n_phi) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "preset" {
                if cfg.is_some() || surface_kind.is_some() || mesh_kind.is_some() {
                    return Err(Error::Config("`preset` must be the first key".into()));
                }
                cfg = Some(Self::preset(value)?);
                continue;
            }
            match key {
                "surface.kind" => surface_kind = Some(value.to_string()),
                "surface.radius" => radius = Some(parse_num(key, value)?),
                "mesh.kind" => mesh_kind = Some(value.to_string()),
                "mesh.level" => level = Some(parse_num(key, value)?),
                "mesh.n_theta" => n_theta = Some(parse_num(key, value)?),
                "mesh.n_phi" => n_phi = Some(parse_num(key, value)?),
                _ => {
                    let c = cfg.get_or_insert_with(|| {
                        Self::base(SurfaceFamily::unit_sphere(), MeshSpec::Icosphere { level: 3 }, 0.4, 1e-3, 0.0, InitialData::Constant(0.0))
                    });
                    c.set(key, value)?;
                }
            }
        }
        let mut cfg = cfg.unwrap_or_else(|| {
            Self::base(SurfaceFamily::unit_sphere(), MeshSpec::Icosphere { level: 3 }, 0.4, 1e-3, 0.0, InitialData::Constant(0.0))
        });
        if let Some(kind) = surface_kind {
            cfg.family = match (kind.as_str(), radius) {
                ("stationary_sphere", r) => SurfaceFamily::StationarySphere { radius: r.unwrap_or(1.0) },
                (_, Some(_)) => return Err(Error::Config("`surface.radius` applies to stationary_sphere only".into())),
                (other, None) => other.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            };
        } else if let Some(r) = radius {
            match cfg.family {
                SurfaceFamily::StationarySphere { .. } => cfg.family = SurfaceFamily::StationarySphere { radius: r },
                _ => return Err(Error::Config("`surface.radius` applies to stationary_sphere only".into())),
            }
        }
        let kind = mesh_kind.unwrap_or_else(|| match cfg.mesh {
            MeshSpec::Icosphere { .. } => "icosphere".into(),
            MeshSpec::Torus { .. } => "torus".into(),
        });
        cfg.mesh = match (kind.as_str(), cfg.mesh) {
            ("icosphere", MeshSpec::Icosphere { level: l }) => MeshSpec::Icosphere { level: level.unwrap_or(l) },
            ("icosphere", _) => MeshSpec::Icosphere { level: level.unwrap_or(3) },
            ("torus", MeshSpec::Torus { n_theta: a, n_phi: b }) => {
                MeshSpec::Torus { n_theta: n_theta.unwrap_or(a), n_phi: n_phi.unwrap_or(b) }
            }
            ("torus", _) => MeshSpec::Torus { n_theta: n_theta.unwrap_or(36), n_phi: n_phi.unwrap_or(21) },
            (other, _) => return Err(Error::Config(format!("unknown mesh kind `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, None)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model.epsilon" => self.epsilon = parse_num(key, value)?,
            "model.theta" => self.theta = parse_num(key, value)?,
            "time.tau" => self.tau = parse_num(key, value)?,
            "time.t_end" => self.t_end = parse_num(key, value)?,
            "initial" => self.initial = value.parse()?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.snapshot_every" => self.snapshot_every = parse_num(key, value)?,
            "newton.tol" => self.newton_tol = parse_num(key, value)?,
            "newton.max_iters" => self.newton_max_iters = parse_num(key, value)?,
            "newton.max_halvings" => self.damping_max_halvings = parse_num(key, value)?,
            "newton.margin" => self.feasibility_margin = parse_num(key, value)?,
            "newton.delta_schedule" => {
                self.delta_schedule = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialParams> {
        PotentialParams::new(self.theta, self.epsilon).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scheme(&self) -> Result<SchemeParams> {
        let params = SchemeParams {
            newton_tol: self.newton_tol,
            newton_max_iters: self.newton_max_iters,
            damping_max_halvings: self.damping_max_halvings,
            feasibility_margin: self.feasibility_margin,
            delta_schedule: self.delta_schedule.clone(),
            ..SchemeParams::new(self.potential()?, self.tau, self.t_end)
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme()?;
        self.family
            .check_time(self.t_end)
            .map_err(|e| Error::Config(format!("t_end: {e}")))?;
        let ok = match self.mesh {
            MeshSpec::Icosphere { .. } => self.family.is_sphere(),
            MeshSpec::Torus { .. } => self.family.is_torus(),
        };
        if !ok {
            return Err(Error::Config(format!("{} does not fit the {} family", self.mesh, self.family)));
        }
        Ok(())
    }

    /// Mesh at `t = 0`, scheme parameters and interpolated initial data.
    pub fn build(&self) -> Result<(SurfaceMesh, SchemeParams, FeFunction)> {
        let mesh = self.mesh.build(self.family).map_err(|e| Error::Config(e.to_string()))?;
        let u0 = self.initial.interpolate(&mesh).map_err(|e| Error::Config(e.to_string()))?;
        Ok((mesh, self.scheme()?, u0))
    }

    /// Text form that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.family {
            SurfaceFamily::StationarySphere { radius } => {
                s += "surface.kind = stationary_sphere\n";
                s += &format!("surface.radius = {radius:?}\n");
            }
            f => s += &format!("surface.kind = {f}\n"),
        }
        match self.mesh {
            MeshSpec::Icosphere { level } => s += &format!("mesh.kind = icosphere\nmesh.level = {level}\n"),
            MeshSpec::Torus { n_theta, n_phi } => {
                s += &format!("mesh.kind = torus\nmesh.n_theta = {n_theta}\nmesh.n_phi = {n_phi}\n")
            }
        }
        s += &format!("model.epsilon = {:?}\nmodel.theta = {:?}\n", self.epsilon, self.theta);
        s += &format!("time.tau = {:?}\ntime.t_end = {:?}\n", self.tau, self.t_end);
        s += &format!("initial = {}\n", self.initial);
        s += &format!("output.dir = {}\n", self.output_dir.display());
        s += &format!("output.snapshot_every = {}\n", self.snapshot_every);
        s += &format!(
            "newton.tol = {:?}\nnewton.max_iters = {}\nnewton.max_halvings = {}\nnewton.margin = {:?}\n",
            self.newton_tol, self.newton_max_iters, self.damping_max_halvings, self.feasibility_margin
        );
        let deltas: Vec<String> = self.delta_schedule.iter().map(|d| format!("{d:?}")).collect();
        s += &format!("newton.delta_schedule = {}\n", deltas.join(", "));
        s += &format!("seed = {}\n", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_text() {
        for name in PRESETS {
            let c = ExperimentConfig::preset(name).unwrap();
            c.validate().unwrap();
            let back = ExperimentConfig::parse(&c.to_text(), None).unwrap();
            assert_eq!(back, c, "{name}");
        }
        let paper = ExperimentConfig::preset("expanding_torus_paper").unwrap();
        assert_eq!(paper.scheme().unwrap().step_count(), 12000);
        assert_eq!(paper.mesh.build(paper.family).unwrap().triangle_count(), 6016);
    }

    #[test]
    fn overrides_and_errors() {
        let text = "preset = shrinking_torus_reduced\n# tweak\ntime.t_end = 0.01  # short\ninitial = constant(0.2)\n";
        let c = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(c.family, SurfaceFamily::ShrinkingTorus);
        assert_eq!(c.t_end, 0.01);
        assert_eq!(c.initial, InitialData::Constant(0.2));

        let c = ExperimentConfig::parse("initial = expr(0.5*x + 0.1)\nsurface.kind = stationary_sphere\nsurface.radius = 2\n", None).unwrap();
        assert_eq!(c.family, SurfaceFamily::StationarySphere { radius: 2.0 });
        assert_eq!(c.initial.eval(&crate::geometry::Point3::new(1.0, 0.0, 0.0)), 0.6);

        for bad in [
            "bogus = 1",
            "model.theta = 1.5",
            "time.tau = 0",
            "surface.kind = shrinking_torus\nmesh.kind = torus\ntime.t_end = 1.0",
            "surface.kind = expanding_torus",
            "initial = constant(x)",
            "time.t_end = 1\npreset = expanding_torus_paper",
            "no equals sign",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad, None), Err(Error::Config(_))), "{bad}");
        }
    }
}

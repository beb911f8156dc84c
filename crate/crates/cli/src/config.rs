//! Scenario files: flat `key = value` lines, `#` comments, dotted sections
//! (`evolve.dt`, `pde.D_v`, ...).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use curvefront::study::Shape;
use curvefront::{EvolutionConfig, PointCloud, RDParams, ResampleConfig, Vec2, VelocityField};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSource {
    Circle { r0: f64 },
    Asterisk,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    Curvature,
    CoupledRd,
    Constant(Vec2),
}

/// Evolution settings as written; tolerances left out are derived from the
/// initial cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveSettings {
    pub dt: f64,
    pub t_end: f64,
    pub tau: Option<f64>,
    pub eps_tol: Option<f64>,
    pub alpha: f64,
    pub max_opt_iters: usize,
    pub stencil_size: usize,
    pub degree: usize,
    pub max_insertions: usize,
    pub resample: bool,
    pub d_tol_min: Option<f64>,
    pub d_tol_max: Option<f64>,
    pub eps_d: Option<f64>,
    pub velocity: Velocity,
    pub sign: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 0.18,
            tau: None,
            eps_tol: None,
            alpha: 0.5,
            max_opt_iters: 50,
            stencil_size: 9,
            degree: 7,
            max_insertions: 0,
            resample: true,
            d_tol_min: None,
            d_tol_max: None,
            eps_d: None,
            velocity: Velocity::Curvature,
            sign: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSettings {
    pub params: RDParams,
    /// Drawn from the run's generator when absent.
    pub theta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub shape: ShapeSource,
    pub n: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub export_every: usize,
    pub evolve: EvolveSettings,
    pub pde: Option<PdeSettings>,
    pub converge_ns: Vec<usize>,
    pub study_n: usize,
    pub study_sizes: Vec<usize>,
    pub study_degrees: Vec<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            shape: ShapeSource::Circle { r0: 1.0 },
            n: 200,
            seed: 0,
            out: None,
            export_every: 1,
            evolve: EvolveSettings::default(),
            pde: None,
            converge_ns: vec![30, 60, 120, 240],
            study_n: 40,
            study_sizes: (5..=20).collect(),
            study_degrees: (2..=9).collect(),
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::at(line, format!("{key}: cannot parse '{v}'")))
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(ConfigError::at(line, format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let ShapeSource::File(p) = &mut cfg.shape {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected key = value, got '{body}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::at(line, "missing key"));
            }
            if let Some((first, _)) = entries.insert(k.to_string(), (line, v.to_string())) {
                return Err(ConfigError::at(line, format!("{k} already set on line {first}")));
            }
        }

        let mut cfg = Self::default();
        let mut shape = "circle".to_string();
        let mut shape_line = 0;
        let (mut r0, mut shape_path) = (1.0, None);
        let (mut vx, mut vy) = (0.0, 0.0);
        let mut pde: Option<PdeSettings> = None;
        for (key, (line, v)) in &entries {
            let (line, v) = (*line, v.as_str());
            let e = &mut cfg.evolve;
            match key.as_str() {
                "shape" => {
                    shape = v.to_string();
                    shape_line = line;
                }
                "shape.r0" => r0 = num(line, key, v)?,
                "shape.path" => shape_path = Some(PathBuf::from(v)),
                "N" => cfg.n = num(line, key, v)?,
                "seed" => cfg.seed = num(line, key, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                "export_every" => cfg.export_every = num(line, key, v)?,
                "evolve.dt" => e.dt = num(line, key, v)?,
                "evolve.t_end" => e.t_end = num(line, key, v)?,
                "evolve.tau" => e.tau = Some(num(line, key, v)?),
                "evolve.eps_tol" => e.eps_tol = Some(num(line, key, v)?),
                "evolve.alpha" => e.alpha = num(line, key, v)?,
                "evolve.max_opt_iters" => e.max_opt_iters = num(line, key, v)?,
                "evolve.m" | "evolve.stencil_size" => e.stencil_size = num(line, key, v)?,
                "evolve.degree" => e.degree = num(line, key, v)?,
                "evolve.max_insertions" => e.max_insertions = num(line, key, v)?,
                "evolve.resample" => e.resample = flag(line, key, v)?,
                "evolve.d_tol_min" => e.d_tol_min = Some(num(line, key, v)?),
                "evolve.d_tol_max" => e.d_tol_max = Some(num(line, key, v)?),
                "evolve.eps_d" => e.eps_d = Some(num(line, key, v)?),
                "evolve.velocity" => {
                    e.velocity = match v {
                        "curvature" | "curvature_flow" => Velocity::Curvature,
                        "coupled_rd" => Velocity::CoupledRd,
                        "constant" => Velocity::Constant(Vec2::zeros()),
                        _ => return Err(ConfigError::at(line, format!("unknown velocity '{v}'"))),
                    }
                }
                "evolve.velocity.x" => vx = num(line, key, v)?,
                "evolve.velocity.y" => vy = num(line, key, v)?,
                "evolve.sign" => e.sign = num(line, key, v)?,
                "converge.N" => cfg.converge_ns = list(line, key, v)?,
                "param_study.N" => cfg.study_n = num(line, key, v)?,
                "param_study.m" => cfg.study_sizes = list(line, key, v)?,
                "param_study.degrees" => cfg.study_degrees = list(line, key, v)?,
                k if k.starts_with("pde.") => {
                    let s = pde.get_or_insert(PdeSettings { params: RDParams::default(), theta0: None });
                    let p = &mut s.params;
                    match &k[4..] {
                        "D_u" => p.d_u = num(line, key, v)?,
                        "D_v" => p.d_v = num(line, key, v)?,
                        "gamma" => p.gamma = num(line, key, v)?,
                        "c" => p.react_c = num(line, key, v)?,
                        "d" => p.react_d = num(line, key, v)?,
                        "sigma" => p.sigma = num(line, key, v)?,
                        "theta0" => s.theta0 = Some(num(line, key, v)?),
                        "c1" => p.c1 = num(line, key, v)?,
                        "c2" => p.c2 = num(line, key, v)?,
                        "enabled" => {}
                        _ => return Err(ConfigError::at(line, format!("unknown key '{key}'"))),
                    }
                }
                _ => return Err(ConfigError::at(line, format!("unknown key '{key}'"))),
            }
        }
        if let Velocity::Constant(c) = &mut cfg.evolve.velocity {
            *c = Vec2::new(vx, vy);
        }
        cfg.pde = pde;
        cfg.shape = match shape.as_str() {
            "circle" => ShapeSource::Circle { r0 },
            "asterisk" => ShapeSource::Asterisk,
            "file" => ShapeSource::File(
                shape_path.ok_or_else(|| ConfigError::at(shape_line, "shape = file needs shape.path"))?,
            ),
            other => return Err(ConfigError::at(shape_line, format!("unknown shape '{other}'"))),
        };
        cfg.check(&entries)?;
        Ok(cfg)
    }

    fn check(&self, entries: &BTreeMap<String, (usize, String)>) -> Result<(), ConfigError> {
        let at = |key: &str, msg: &str| match entries.get(key) {
            Some((l, _)) => ConfigError::at(*l, format!("{key}: {msg}")),
            None => ConfigError::general(format!("{key}: {msg}")),
        };
        if self.n < 8 {
            return Err(at("N", "at least 8 points are needed"));
        }
        if self.export_every == 0 {
            return Err(at("export_every", "must be at least 1"));
        }
        if let ShapeSource::Circle { r0 } = self.shape {
            if !(r0 > 0.0) {
                return Err(at("shape.r0", "must be positive"));
            }
        }
        if self.evolve.velocity == Velocity::CoupledRd && self.pde.is_none() {
            return Err(at("evolve.velocity", "coupled_rd needs reaction-diffusion parameters (pde.*)"));
        }
        Ok(())
    }

    /// Sets the seed, the export interval and the output directory from
    /// command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, export_every: Option<usize>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(k) = export_every {
            self.export_every = k.max(1);
        }
        if out.is_some() {
            self.out = out;
        }
        self
    }

    pub fn shape(&self) -> Result<Shape, ConfigError> {
        Ok(match &self.shape {
            ShapeSource::Circle { r0 } => Shape::Circle { r0: *r0 },
            ShapeSource::Asterisk => Shape::Asterisk,
            ShapeSource::File(p) => Shape::Points(read_points(p)?),
        })
    }

    pub fn cloud(&self) -> Result<PointCloud, ConfigError> {
        let shape = self.shape()?;
        let n = if let Shape::Points(p) = &shape { p.len() } else { self.n };
        curvefront::study::generate(&shape, n).map_err(|e| ConfigError::general(e.to_string()))
    }

    /// Evolution settings for `cloud`; `theta0` fills in an unset perturbation
    /// center.
    pub fn evolution(&self, cloud: &PointCloud, theta0: f64) -> EvolutionConfig {
        let e = &self.evolve;
        let mut cfg = EvolutionConfig::for_cloud(cloud, e.dt, e.t_end);
        let (core, bdy) = curvefront::cover::split_stencil_size(e.stencil_size);
        cfg.core_size = core;
        cfg.boundary_size = bdy;
        cfg.degree = e.degree;
        cfg.alpha = e.alpha;
        cfg.max_opt_iters = e.max_opt_iters;
        cfg.max_insertions = e.max_insertions;
        if let Some(t) = e.tau {
            cfg.tau = t;
        }
        if let Some(t) = e.eps_tol {
            cfg.eps_tol = t;
        }
        cfg.resample = if e.resample {
            let d = ResampleConfig::for_cloud(cloud);
            Some(ResampleConfig {
                d_tol_min: e.d_tol_min.unwrap_or(d.d_tol_min),
                d_tol_max: e.d_tol_max.unwrap_or(d.d_tol_max),
                eps_d: e.eps_d.unwrap_or(d.eps_d),
            })
        } else {
            None
        };
        cfg.pde = self.pde.as_ref().map(|p| RDParams { theta0: p.theta0.unwrap_or(theta0), ..p.params });
        cfg.velocity = match e.velocity {
            Velocity::Curvature => VelocityField::CurvatureFlow,
            Velocity::Constant(v) => VelocityField::Constant(v),
            Velocity::CoupledRd => {
                let p = cfg.pde.unwrap_or_default();
                VelocityField::CoupledRd { c1: p.c1, c2: p.c2, sign: e.sign }
            }
        };
        cfg
    }
}

/// One `x,y` (or whitespace separated) pair per line; `#` starts a comment.
pub fn read_points(path: &Path) -> Result<Vec<Vec2>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let xy: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || ConfigError::general(format!("{}:{}: expected two numbers", path.display(), i + 1));
        if xy.len() != 2 {
            return Err(bad());
        }
        let x = xy[0].parse().map_err(|_| bad())?;
        let y = xy[1].parse().map_err(|_| bad())?;
        out.push(Vec2::new(x, y));
    }
    Ok(out)
}

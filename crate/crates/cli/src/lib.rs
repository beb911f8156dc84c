//! Scenario files, frame export and the study drivers behind the
//! `curvefront` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod export;

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvefront::study::{circle_convergence, circle_param_study, ConvergenceRow, ParamRow};
use curvefront::{Error, Simulation};

pub use config::{ConfigError, ScenarioConfig, ShapeSource};
use export::{FrameWriter, Summary};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// The run stopped at `step`; frames up to `last_good` are on disk.
    Blowup { step: usize, last_good: usize, message: String },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Blowup { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Blowup { step, last_good, message } => {
                write!(f, "run failed at step {step}: {message}; last good frame {last_good}")
            }
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn config_error(e: Error) -> CliError {
    CliError::Config(ConfigError { line: None, message: e.to_string() })
}

pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Perturbation center from the run's generator.
pub fn draw_theta0(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI)
}

fn header(cfg: &ScenarioConfig) -> Summary {
    let mut s = Summary::default();
    s.push("seed", cfg.seed);
    s.push(
        "shape",
        match &cfg.shape {
            ShapeSource::Circle { r0 } => format!("circle r0={r0}"),
            ShapeSource::Asterisk => "asterisk".to_string(),
            ShapeSource::File(p) => format!("file {}", p.display()),
        },
    );
    s
}

/// Runs the scenario, writing every `export_every`-th frame and the final
/// one under `out/frames`, then `out/summary.txt`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Summary, CliError> {
    let out = output_dir(cfg);
    let cloud = cfg.cloud()?;
    let theta0 = draw_theta0(cfg.seed);
    let evo = cfg.evolution(&cloud, theta0);
    evo.validate().map_err(config_error)?;
    let initial = cloud.len();
    let mut sim = Simulation::new(cloud, evo.clone()).map_err(config_error)?;

    let mut writer = FrameWriter::create(&out.join("frames"))?;
    let mut summary = header(cfg);
    if let Some(p) = &evo.pde {
        summary.push("theta0", p.theta0);
    }
    summary.push("resampling", if evo.resample.is_some() { "enabled" } else { "disabled" });
    summary.push("initial_points", initial);

    let mut last = sim.frame();
    writer.write(&last)?;
    let failure = loop {
        if !sim.running() {
            break None;
        }
        if let Err(e) = sim.step() {
            break Some((sim.step_index() + 1, e));
        }
        last = sim.frame();
        if last.step % cfg.export_every == 0 || !sim.running() {
            writer.write(&last)?;
        }
    };
    if writer.last_step() != Some(last.step) {
        writer.write(&last)?;
    }

    summary.push("status", if failure.is_some() { "failed" } else { "ok" });
    summary.extend_frame(&last);
    summary.push("frames_written", writer.count());
    if let Some((step, e)) = &failure {
        summary.push("failed_step", step);
        summary.push("error", e);
    }
    summary.write(&out.join("summary.txt"))?;
    match failure {
        None => Ok(summary),
        Some((step, e)) => Err(CliError::Blowup { step, last_good: last.step, message: e.to_string() }),
    }
}

fn circle_only(cfg: &ScenarioConfig, what: &str) -> Result<f64, CliError> {
    match cfg.shape {
        ShapeSource::Circle { r0 } => Ok(r0),
        _ => Err(CliError::Config(ConfigError { line: None, message: format!("{what} needs shape = circle") })),
    }
}

/// Circle radius errors at each `converge.N`; writes `converge.csv`.
pub fn converge(cfg: &ScenarioConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    let r0 = circle_only(cfg, "converge")?;
    let e = &cfg.evolve;
    if cfg.converge_ns.iter().any(|&n| n < 8) {
        return Err(CliError::Config(ConfigError { line: None, message: "converge.N entries must be at least 8".into() }));
    }
    let rows = circle_convergence(r0, &cfg.converge_ns, e.dt, e.t_end, e.stencil_size, e.degree).map_err(|err| match err {
        Error::InvalidConfiguration(_) | Error::MissingField(_) => config_error(err),
        other => CliError::Blowup { step: 0, last_good: 0, message: other.to_string() },
    })?;
    let out = output_dir(cfg);
    std::fs::create_dir_all(&out)?;
    let mut csv = String::from("n,h,error,mean_radius\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.n, r.h, r.error, r.mean_radius));
    }
    std::fs::write(out.join("converge.csv"), csv)?;
    let mut s = header(cfg);
    s.push("status", "ok");
    s.push("resampling", "disabled");
    s.push("dt", e.dt);
    s.push("t_end", e.t_end);
    s.push("stencil_size", e.stencil_size);
    s.push("degree", e.degree);
    s.write(&out.join("summary.txt"))?;
    Ok(rows)
}

/// Static normal and curvature errors over the configured grid; writes
/// `param_study.csv`.
pub fn param_study(cfg: &ScenarioConfig) -> Result<Vec<ParamRow>, CliError> {
    circle_only(cfg, "param-study")?;
    let rows = circle_param_study(cfg.study_n, &cfg.study_sizes, &cfg.study_degrees).map_err(config_error)?;
    let out = output_dir(cfg);
    std::fs::create_dir_all(&out)?;
    let mut csv = String::from("m,p,normal_error,curvature_error\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.stencil_size, r.degree, r.normal_error, r.curvature_error));
    }
    std::fs::write(out.join("param_study.csv"), csv)?;
    Ok(rows)
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    Ok(ScenarioConfig::load(path)?)
}

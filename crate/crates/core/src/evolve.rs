//! Lagrangian time stepping of the point cloud together with the stencil
//! control points, with warm-started least-squares correction and
//! spacing maintenance.

use crate::cover::{partition, PointCloud};
use crate::curve::Vec2;
use crate::diffgeo::{core_geometry, orientation_of, GeometrySample};
use crate::error::{Error, Result};
use crate::fit::{diameter, Stencil};
use crate::pde::{arc_positions, gaussian_ic, imex_step, FieldState, RDParams};
use crate::resample::{insert_far, needs_resampling, redistribute, remove_close, Resampled};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityField {
    /// `V = -κ_s n̂`.
    CurvatureFlow,
    /// `V = sign (c1 κ_s + c2 u) n̂`.
    CoupledRd { c1: f64, c2: f64, sign: f64 },
    Constant(Vec2),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampleConfig {
    pub d_tol_min: f64,
    pub d_tol_max: f64,
    pub eps_d: f64,
}

impl ResampleConfig {
    /// Thresholds tied to the initial mean spacing `L0 / N0`.
    pub fn for_cloud(cloud: &PointCloud) -> Self {
        let h0 = crate::diffgeo::arc_length(cloud.points(), true) / cloud.len() as f64;
        Self { d_tol_min: 0.9 * h0, d_tol_max: 2.0 * h0, eps_d: 1e-2 * h0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub tau: f64,
    pub eps_tol: f64,
    pub alpha: f64,
    pub max_opt_iters: usize,
    pub core_size: usize,
    pub boundary_size: usize,
    pub degree: usize,
    /// Knot insertions allowed per stencil fit.
    pub max_insertions: usize,
    pub resample: Option<ResampleConfig>,
    pub velocity: VelocityField,
    pub pde: Option<RDParams>,
}

impl EvolutionConfig {
    /// Curvature flow with tolerances scaled to `cloud`.
    pub fn for_cloud(cloud: &PointCloud, dt: f64, t_end: f64) -> Self {
        let h0 = crate::diffgeo::arc_length(cloud.points(), true) / cloud.len() as f64;
        Self {
            dt,
            t_end,
            tau: 1e-6 * diameter(cloud.points()),
            eps_tol: 1e-2 * h0,
            alpha: 0.5,
            max_opt_iters: 50,
            core_size: 5,
            boundary_size: 4,
            degree: 7,
            max_insertions: 0,
            resample: Some(ResampleConfig::for_cloud(cloud)),
            velocity: VelocityField::CurvatureFlow,
            pde: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfiguration(msg.into()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0) {
            return bad("t_end must be non-negative");
        }
        if !(self.tau > 0.0 && self.eps_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if self.degree < 2 {
            return bad("curvature needs degree 2 or more");
        }
        if self.degree + 1 > self.core_size + self.boundary_size {
            return bad("degree must be below the stencil size");
        }
        if let Some(r) = &self.resample {
            if !(r.d_tol_min > 0.0 && r.eps_d > 0.0 && r.d_tol_min < r.d_tol_max) {
                return bad("resampling needs 0 < d_tol_min < d_tol_max and eps_d > 0");
            }
        }
        if let VelocityField::CoupledRd { .. } = self.velocity {
            if self.pde.is_none() {
                return Err(Error::MissingField("pde"));
            }
        }
        if let Some(p) = &self.pde {
            p.validate()?;
        }
        Ok(())
    }

    /// Smallest cloud the run continues with.
    pub fn min_points(&self) -> usize {
        (4 * self.degree).max(self.core_size + self.boundary_size)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

pub fn velocity_at(field: &VelocityField, sample: &GeometrySample, u_value: Option<f64>) -> Result<Vec2> {
    match *field {
        VelocityField::CurvatureFlow => Ok(-sample.signed_curvature * sample.normal),
        VelocityField::CoupledRd { c1, c2, sign } => {
            let u = u_value.ok_or(Error::MissingField("u"))?;
            Ok(sign * (c1 * sample.signed_curvature + c2 * u) * sample.normal)
        }
        VelocityField::Constant(v) => Ok(v),
    }
}

/// Forward Euler update `q_i + dt V_i`.
pub fn step_points(pc: &PointCloud, velocities: &[Vec2], dt: f64, step: usize) -> Result<PointCloud> {
    if velocities.len() != pc.len() {
        return Err(Error::InvalidConfiguration("one velocity per point required".into()));
    }
    let moved: Vec<Vec2> = pc.points().iter().zip(velocities).map(|(q, v)| q + dt * v).collect();
    if moved.iter().any(|q| !q.x.is_finite() || !q.y.is_finite()) {
        return Err(Error::NumericalBlowup { step });
    }
    Ok(PointCloud::from_ccw(moved))
}

/// Velocities of the control points, each taken at `f(greville_j)` with
/// `κ_s`, `n̂` and `u` interpolated linearly in the parameter between the
/// annotated stencil points. `geometry` and `u_field` are indexed by cloud
/// point.
pub fn control_velocities(
    stencil: &Stencil,
    field: &VelocityField,
    geometry: &[GeometrySample],
    u_field: Option<&[f64]>,
) -> Result<Vec<Vec2>> {
    let params = stencil.params();
    let ix = stencil.indices();
    stencil
        .curve()
        .knots()
        .greville()
        .into_iter()
        .map(|g| {
            let i = params.partition_point(|&p| p <= g).clamp(1, params.len() - 1) - 1;
            let t = ((g - params[i]) / (params[i + 1] - params[i])).clamp(0.0, 1.0);
            let (a, b) = (&geometry[ix.global(i)], &geometry[ix.global(i + 1)]);
            let lerp_unit = |x: Vec2, y: Vec2| {
                let v = x * (1.0 - t) + y * t;
                let len = v.norm();
                if len > 0.0 { Ok(v / len) } else { Err(Error::DegenerateTangent { u: g }) }
            };
            let normal = lerp_unit(a.normal, b.normal)?;
            let tangent = lerp_unit(a.tangent, b.tangent)?;
            let ks = a.signed_curvature * (1.0 - t) + b.signed_curvature * t;
            let sample = GeometrySample {
                point_index: a.point_index,
                normal,
                tangent,
                curvature: ks.abs(),
                signed_curvature: ks,
            };
            let u = u_field.map(|u| u[ix.global(i)] * (1.0 - t) + u[ix.global(i + 1)] * t);
            velocity_at(field, &sample, u)
        })
        .collect()
}

/// `P_j + dt V_j`.
pub fn step_control_points(stencil: &mut Stencil, velocities: &[Vec2], dt: f64, step: usize) -> Result<()> {
    let cps = stencil.control_points_mut();
    if velocities.len() != cps.len() {
        return Err(Error::InvalidConfiguration("one velocity per control point required".into()));
    }
    for (p, v) in cps.iter_mut().zip(velocities) {
        *p += dt * v;
    }
    if cps.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::NumericalBlowup { step });
    }
    Ok(())
}

pub fn interpolation_error(stencil: &Stencil, cloud: &PointCloud) -> f64 {
    stencil.interpolation_error(cloud.points())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeReport {
    /// Sweeps performed, including rejected ones.
    pub iterations: usize,
    pub error: f64,
    pub alpha: f64,
}

/// Sequential gradient sweeps over the control points,
/// `P_j <- P_j - alpha grad_j sum |q_i - f(u_i)|^2`, each update seeing the
/// residuals left by the previous one. Stops once the interpolation error
/// is within `tau` or after `max_iters` sweeps.
pub fn optimize_control_points(
    stencil: &mut Stencil,
    cloud: &PointCloud,
    tau: f64,
    alpha: f64,
    max_iters: usize,
) -> Result<OptimizeReport> {
    let ix = *stencil.indices();
    let colloc = stencil.collocation().clone();
    let mut residual: Vec<Vec2> = ix
        .indices()
        .enumerate()
        .map(|(l, i)| cloud.points()[i] - colloc.eval(l, stencil.curve().control_points()))
        .collect();
    let max_norm = |r: &[Vec2]| r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let objective = |r: &[Vec2]| r.iter().map(|v| v.norm_squared()).sum::<f64>();
    let mut error = max_norm(&residual);
    let mut alpha = alpha;
    if error <= tau {
        return Ok(OptimizeReport { iterations: 0, error, alpha });
    }

    // rows touching each control point, with the basis weight
    let ncp = stencil.curve().control_points().len();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncp];
    for row in 0..colloc.rows() {
        let (first, w) = colloc.row(row);
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                columns[first + k].push((row, wk));
            }
        }
    }

    let mut obj = objective(&residual);
    let mut increases = 0;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let saved_cps = stencil.curve().control_points().to_vec();
        let saved_res = residual.clone();
        let cps = stencil.control_points_mut();
        for (j, col) in columns.iter().enumerate() {
            let grad = col.iter().fold(Vec2::zeros(), |acc, &(row, w)| acc + residual[row] * w);
            let delta = 2.0 * alpha * grad;
            cps[j] += delta;
            for &(row, w) in col {
                residual[row] -= delta * w;
            }
        }
        let next = objective(&residual);
        if next > obj {
            stencil.set_control_points(saved_cps)?;
            residual = saved_res;
            increases += 1;
            if increases >= 3 {
                alpha *= 0.5;
                increases = 0;
                if alpha < 1e-8 {
                    return Err(Error::OptimizationFailure { min_alpha: alpha });
                }
            }
            continue;
        }
        increases = 0;
        obj = next;
        error = max_norm(&residual);
        if error <= tau {
            break;
        }
    }
    Ok(OptimizeReport { iterations, error, alpha })
}

/// Partitions the cloud and fits every stencil, lowering the degree of a
/// stencil that is too short for it or whose interpolation system is
/// singular.
pub fn fit_stencils(cloud: &PointCloud, cfg: &EvolutionConfig) -> Result<(Vec<Stencil>, usize)> {
    let layout = partition(cloud.len(), cfg.core_size, cfg.boundary_size)?;
    let mut insertions = 0;
    let mut out = Vec::with_capacity(layout.len());
    for ix in layout {
        let mut degree = cfg.degree.min(ix.len() - 1);
        let stencil = loop {
            match Stencil::fit(ix, cloud.points(), degree, Some((cfg.eps_tol, cfg.max_insertions))) {
                Ok((s, report)) => {
                    insertions += report.refinement_steps;
                    break s;
                }
                Err(Error::FitFailure(_)) if degree > 2 => degree -= 1,
                Err(e) => return Err(e),
            }
        };
        out.push(stencil);
    }
    Ok((out, insertions))
}

fn geometry_of(stencils: &[Stencil], n: usize, orientation: f64) -> Result<Vec<GeometrySample>> {
    let mut geometry = vec![None; n];
    for s in stencils {
        for g in core_geometry(s, orientation)? {
            geometry[g.point_index] = Some(g);
        }
    }
    geometry
        .into_iter()
        .map(|g| g.ok_or_else(|| Error::InvalidConfiguration("stencil cores do not cover the cloud".into())))
        .collect()
}

/// Events of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepFlags {
    pub removed: usize,
    pub inserted: usize,
    pub redistributed: bool,
    pub redistribution_skipped: bool,
    pub refit: bool,
    pub refinement_insertions: usize,
    pub optimized_stencils: usize,
    pub optimizer_sweeps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub step: usize,
    pub time: f64,
    pub points: Vec<Vec2>,
    /// Signed curvature per point.
    pub curvature: Vec<f64>,
    pub normals: Vec<Vec2>,
    pub fields: Option<(Vec<f64>, Vec<f64>)>,
    pub point_count: usize,
    pub flags: StepFlags,
}

/// Evolution state advanced one step at a time.
pub struct Simulation {
    cfg: EvolutionConfig,
    cloud: PointCloud,
    stencils: Vec<Stencil>,
    geometry: Vec<GeometrySample>,
    fields: Option<FieldState>,
    orientation: f64,
    step: usize,
    flags: StepFlags,
}

impl Simulation {
    pub fn new(cloud: PointCloud, cfg: EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        if cloud.len() < cfg.core_size + cfg.boundary_size {
            return Err(Error::InvalidConfiguration(format!(
                "{} points cannot hold a stencil of {}",
                cloud.len(),
                cfg.core_size + cfg.boundary_size
            )));
        }
        let orientation = orientation_of(cloud.points());
        let (stencils, insertions) = fit_stencils(&cloud, &cfg)?;
        let geometry = geometry_of(&stencils, cloud.len(), orientation)?;
        let fields = match &cfg.pde {
            Some(p) => {
                let (arc, total) = arc_positions(cloud.points());
                Some(gaussian_ic(p, &arc, total)?)
            }
            None => None,
        };
        let flags = StepFlags { refit: true, refinement_insertions: insertions, ..StepFlags::default() };
        Ok(Self { cfg, cloud, stencils, geometry, fields, orientation, step: 0, flags })
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.stencils
    }

    pub fn geometry(&self) -> &[GeometrySample] {
        &self.geometry
    }

    pub fn fields(&self) -> Option<&FieldState> {
        self.fields.as_ref()
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    /// Whether another step is due and the cloud is still large enough.
    pub fn running(&self) -> bool {
        self.step < self.cfg.steps() && self.cloud.len() >= self.cfg.min_points()
    }

    pub fn frame(&self) -> FrameRecord {
        FrameRecord {
            step: self.step,
            time: self.time(),
            points: self.cloud.points().to_vec(),
            curvature: self.geometry.iter().map(|g| g.signed_curvature).collect(),
            normals: self.geometry.iter().map(|g| g.normal).collect(),
            fields: self.fields.as_ref().map(|f| (f.u.clone(), f.v.clone())),
            point_count: self.cloud.len(),
            flags: self.flags,
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let step = self.step + 1;
        let dt = self.cfg.dt;
        let mut flags = StepFlags::default();
        let u_field = self.fields.as_ref().map(|f| f.u.as_slice());

        let velocities: Vec<Vec2> = self
            .geometry
            .iter()
            .enumerate()
            .map(|(i, g)| velocity_at(&self.cfg.velocity, g, u_field.map(|u| u[i])))
            .collect::<Result<_>>()?;
        if velocities.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::NumericalBlowup { step });
        }
        let control: Vec<Vec<Vec2>> = self
            .stencils
            .iter()
            .map(|s| control_velocities(s, &self.cfg.velocity, &self.geometry, u_field))
            .collect::<Result<_>>()?;

        let cloud = step_points(&self.cloud, &velocities, dt, step)?;
        for (s, v) in self.stencils.iter_mut().zip(&control) {
            step_control_points(s, v, dt, step)?;
            if interpolation_error(s, &cloud) > self.cfg.tau {
                let report =
                    optimize_control_points(s, &cloud, self.cfg.tau, self.cfg.alpha, self.cfg.max_opt_iters)?;
                flags.optimized_stencils += 1;
                flags.optimizer_sweeps += report.iterations;
            }
        }

        if let (Some(params), Some(state)) = (&self.cfg.pde, &self.fields) {
            let (arc, total) = arc_positions(cloud.points());
            let moved = FieldState { u: state.u.clone(), v: state.v.clone(), arc_positions: arc };
            let ks: Vec<f64> = self.geometry.iter().map(|g| g.signed_curvature).collect();
            let vn: Vec<f64> = self.geometry.iter().zip(&velocities).map(|(g, v)| g.normal.dot(v)).collect();
            self.fields = Some(imex_step(&moved, total, &ks, &vn, params, dt)?);
        }

        self.cloud = cloud;
        if let Some(r) = self.cfg.resample {
            if needs_resampling(&self.cloud, r.d_tol_min, r.d_tol_max) {
                self.resample(&r, &mut flags)?;
            }
        }
        self.geometry = geometry_of(&self.stencils, self.cloud.len(), self.orientation)?;
        self.step = step;
        self.flags = flags;
        Ok(())
    }

    fn resample(&mut self, r: &ResampleConfig, flags: &mut StepFlags) -> Result<()> {
        let floor = self.cfg.min_points();
        // even out the spacing first so removal sees the mean gap, not the
        // stencil-periodic ripple on top of it
        let pre = redistribute(&self.stencils, &self.cloud, r.eps_d)?;
        if !pre.skipped && !needs_resampling(&pre.result.cloud, r.d_tol_min, r.d_tol_max) {
            flags.redistributed = true;
            return self.apply(pre.result, flags);
        }
        if !pre.skipped {
            self.apply(pre.result, flags)?;
        }
        let removed = remove_close(&self.cloud, r.d_tol_min, floor);
        if removed.cloud.len() < self.cloud.len() {
            flags.removed = self.cloud.len() - removed.cloud.len();
            self.apply(removed, flags)?;
        }
        let inserted = insert_far(&self.stencils, &self.cloud, r.d_tol_max)?;
        if inserted.cloud.len() > self.cloud.len() {
            flags.inserted = inserted.cloud.len() - self.cloud.len();
            self.apply(inserted, flags)?;
        }
        let red = redistribute(&self.stencils, &self.cloud, r.eps_d)?;
        flags.redistribution_skipped = red.skipped;
        if !red.skipped {
            flags.redistributed = true;
            self.apply(red.result, flags)?;
        }
        Ok(())
    }

    fn apply(&mut self, resampled: Resampled, flags: &mut StepFlags) -> Result<()> {
        if let Some(f) = &self.fields {
            let (arc, _) = arc_positions(resampled.cloud.points());
            self.fields = Some(FieldState { u: resampled.transfer(&f.u), v: resampled.transfer(&f.v), arc_positions: arc });
        }
        self.cloud = resampled.cloud;
        let (stencils, insertions) = fit_stencils(&self.cloud, &self.cfg)?;
        self.stencils = stencils;
        flags.refit = true;
        flags.refinement_insertions += insertions;
        Ok(())
    }
}

/// A failed run with the frames recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{source} (after {} frames)", frames.len())]
pub struct RunError {
    pub source: Error,
    pub frames: Vec<FrameRecord>,
}

/// Runs to `t_end`, recording every frame.
pub fn run(pc: PointCloud, cfg: EvolutionConfig) -> std::result::Result<Vec<FrameRecord>, RunError> {
    let mut frames = Vec::new();
    let mut sim = match Simulation::new(pc, cfg) {
        Ok(s) => s,
        Err(source) => return Err(RunError { source, frames }),
    };
    frames.push(sim.frame());
    while sim.running() {
        if let Err(source) = sim.step() {
            return Err(RunError { source, frames });
        }
        frames.push(sim.frame());
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::partition;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Vec2::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    fn sample(normal: Vec2, ks: f64) -> GeometrySample {
        GeometrySample { point_index: 0, normal, tangent: Vec2::new(-normal.y, normal.x), curvature: ks.abs(), signed_curvature: ks }
    }

    #[test]
    fn velocity_examples() {
        let s = sample(Vec2::new(1.0, 0.0), 1.0);
        assert_eq!(velocity_at(&VelocityField::CurvatureFlow, &s, None).unwrap(), Vec2::new(-1.0, 0.0));
        let flat = sample(Vec2::new(0.0, 1.0), 0.0);
        assert_eq!(velocity_at(&VelocityField::CurvatureFlow, &flat, None).unwrap().norm(), 0.0);
        let rd = VelocityField::CoupledRd { c1: 0.02, c2: 1.0, sign: -1.0 };
        let u0 = 1.0;
        assert!((velocity_at(&rd, &s, Some(u0)).unwrap().norm() - (0.02 + u0)).abs() < 1e-15);
        assert!(matches!(velocity_at(&rd, &s, None), Err(Error::MissingField(_))));
    }

    #[test]
    fn point_steps() {
        let pc = circle(16, 1.0);
        assert_eq!(step_points(&pc, &vec![Vec2::zeros(); 16], 0.1, 1).unwrap(), pc);
        let shifted = step_points(&pc, &vec![Vec2::new(1.0, 0.0); 16], 1e-3, 1).unwrap();
        for (a, b) in shifted.points().iter().zip(pc.points()) {
            assert!((a - b - Vec2::new(1e-3, 0.0)).norm() < 1e-15);
        }
        let v: Vec<Vec2> = pc.points().iter().map(|q| -q).collect();
        let shrunk = step_points(&pc, &v, 1e-3, 1).unwrap();
        assert!(shrunk.points().iter().all(|q| (q.norm() - 0.999).abs() < 1e-5));
        let mut bad = v.clone();
        bad[3].x = f64::NAN;
        assert!(matches!(step_points(&pc, &bad, 1e-3, 7), Err(Error::NumericalBlowup { step: 7 })));
    }

    fn fitted(pc: &PointCloud) -> Vec<Stencil> {
        partition(pc.len(), 5, 4)
            .unwrap()
            .into_iter()
            .map(|ix| Stencil::fit(ix, pc.points(), 7, Some((1e-2 * 2.0 * PI / pc.len() as f64, 16))).unwrap().0)
            .collect()
    }

    #[test]
    fn translation_keeps_interpolation() {
        let pc = circle(30, 1.0);
        let mut stencils = fitted(&pc);
        let geom = geometry_of(&stencils, 30, 1.0).unwrap();
        let v = Vec2::new(0.3, -0.2);
        let moved = step_points(&pc, &vec![v; 30], 0.5, 1).unwrap();
        for s in &mut stencils {
            let before = interpolation_error(s, &pc);
            assert!(before <= 1e-10 * 2.0);
            let cv = control_velocities(s, &VelocityField::Constant(v), &geom, None).unwrap();
            step_control_points(s, &cv, 0.5, 1).unwrap();
            assert!((interpolation_error(s, &moved) - before).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_shows_in_error() {
        let pc = circle(30, 1.0);
        let s = &fitted(&pc)[1];
        let i = s.indices().global(2);
        let mut pts = pc.points().to_vec();
        let delta = 1e-3;
        pts[i].y += delta;
        let err = interpolation_error(s, &PointCloud::from_ccw(pts));
        assert!(err >= delta * (1.0 - 1e-6));
    }

    fn post_step_error(dt: f64) -> f64 {
        let pc = circle(40, 1.0);
        let mut stencils = fitted(&pc);
        let geom = geometry_of(&stencils, 40, 1.0).unwrap();
        let v: Vec<Vec2> = geom.iter().map(|g| velocity_at(&VelocityField::CurvatureFlow, g, None).unwrap()).collect();
        let moved = step_points(&pc, &v, dt, 1).unwrap();
        let mut err: f64 = 0.0;
        for s in &mut stencils {
            let cv = control_velocities(s, &VelocityField::CurvatureFlow, &geom, None).unwrap();
            step_control_points(s, &cv, dt, 1).unwrap();
            err = err.max(interpolation_error(s, &moved));
        }
        err
    }

    #[test]
    fn control_points_follow_the_flow() {
        let e1 = post_step_error(1e-3);
        let e2 = post_step_error(5e-4);
        assert!(e1 <= 1e-4, "{e1}");
        assert!(e2 < e1);
    }

    #[test]
    fn optimizer_skips_satisfied_stencils() {
        let pc = circle(30, 1.0);
        let mut s = fitted(&pc).remove(0);
        let before = s.curve().control_points().to_vec();
        let r = optimize_control_points(&mut s, &pc, 1e-6, 0.5, 50).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(s.curve().control_points(), &before[..]);
    }

    #[test]
    fn optimizer_reaches_least_squares_solution() {
        let pc = circle(30, 1.0);
        let ix = partition(30, 5, 4).unwrap()[2];
        let (mut s, _) = Stencil::fit(ix, pc.points(), 5, None).unwrap();
        let mut pts = pc.points().to_vec();
        for (k, i) in ix.indices().enumerate() {
            pts[i] += Vec2::new(1e-3 * (k as f64).sin(), -1e-3 * (k as f64 * 0.7).cos());
        }
        let moved = PointCloud::from_ccw(pts.clone());
        let r = optimize_control_points(&mut s, &moved, 1e-13, 0.5, 100_000).unwrap();
        assert!(r.error <= 1e-13);
        // normal equations of the same objective
        let m = ix.len();
        let ncp = s.curve().control_points().len();
        let a = DMatrix::from_fn(m, ncp, |i, j| s.curve().knots().basis(j, s.params()[i]).unwrap());
        let rhs = DMatrix::from_fn(m, 2, |i, c| pts[ix.global(i)][c]);
        let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * rhs)).unwrap();
        for (j, p) in s.curve().control_points().iter().enumerate() {
            assert!((p.x - sol[(j, 0)]).abs() < 1e-8 && (p.y - sol[(j, 1)]).abs() < 1e-8);
        }
    }

    #[test]
    fn optimizer_halves_an_overlarge_step() {
        let pc = circle(30, 1.0);
        let ix = partition(30, 5, 4).unwrap()[0];
        let (mut s, _) = Stencil::fit(ix, pc.points(), 5, None).unwrap();
        let mut pts = pc.points().to_vec();
        pts[1].x += 0.01;
        let moved = PointCloud::from_ccw(pts);
        let r = optimize_control_points(&mut s, &moved, 1e-9, 1e3, 100_000).unwrap();
        assert!(r.alpha < 1e3);
        assert!(r.error <= 1e-9);
    }

    #[test]
    fn short_run_records_only_initial_frame() {
        let pc = circle(30, 1.0);
        let cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 5e-4);
        let frames = run(pc.clone(), cfg).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].points, pc.points());
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let pc = circle(40, 1.0);
        let mut cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 0.1);
        cfg.velocity = VelocityField::Constant(Vec2::zeros());
        let frames = run(pc.clone(), cfg).unwrap();
        assert_eq!(frames.len(), 101);
        for (a, b) in frames.last().unwrap().points.iter().zip(pc.points()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn shrinking_circle_reaches_analytic_radius() {
        let pc = circle(60, 1.0);
        let mut cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 0.18);
        cfg.resample = None;
        let frames = run(pc, cfg).unwrap();
        let last = frames.last().unwrap();
        assert!((last.time - 0.18).abs() < 1e-12);
        let mean = last.points.iter().map(|q| q.norm()).sum::<f64>() / last.points.len() as f64;
        assert!((mean - 0.8).abs() < 5e-4, "{mean}");
        for f in &frames {
            let n = f.points.len();
            let convex = (0..n).all(|i| {
                let (a, b, c) = (f.points[i], f.points[(i + 1) % n], f.points[(i + 2) % n]);
                let (e1, e2) = (b - a, c - b);
                e1.x * e2.y - e1.y * e2.x > 0.0
            });
            assert!(convex, "step {}", f.step);
        }
    }

    #[test]
    fn coupled_velocity_needs_fields() {
        let pc = circle(30, 1.0);
        let mut cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 0.01);
        cfg.velocity = VelocityField::CoupledRd { c1: 0.02, c2: 1.0, sign: -1.0 };
        assert!(matches!(cfg.validate(), Err(Error::MissingField("pde"))));
        cfg.pde = Some(RDParams::default());
        let frames = run(pc, cfg).unwrap();
        assert!(frames.iter().all(|f| f.fields.as_ref().is_some_and(|(u, _)| u.len() == f.point_count)));
    }

    #[test]
    fn short_tail_stencil_lowers_degree() {
        // 32 = 6 * 5 + 2: the last stencil holds 2 core + 4 boundary points
        let pc = circle(32, 1.0);
        let cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 0.0);
        let (stencils, _) = fit_stencils(&pc, &cfg).unwrap();
        let last = stencils.last().unwrap();
        assert_eq!(last.indices().len(), 6);
        assert_eq!(last.curve().degree(), 5);
        assert!(stencils[..stencils.len() - 1].iter().all(|s| s.curve().degree() == 7));
    }
}

//! Test shapes and the circle studies: radius convergence under curvature
//! flow and static normal/curvature accuracy over stencil layouts.

use std::f64::consts::PI;

use crate::cover::{partition, split_stencil_size, PointCloud};
use crate::curve::Vec2;
use crate::diffgeo::core_geometry;
use crate::error::{Error, Result};
use crate::evolve::{run, EvolutionConfig};
use crate::fit::Stencil;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { r0: f64 },
    /// `r = 1 + 0.3 cos^2(4 theta)`.
    Asterisk,
    Points(Vec<Vec2>),
}

pub fn asterisk_radius(theta: f64) -> f64 {
    1.0 + 0.3 * (4.0 * theta).cos().powi(2)
}

/// `n` samples uniform in the generating angle, counterclockwise.
pub fn generate(shape: &Shape, n: usize) -> Result<PointCloud> {
    let polar = |r: &dyn Fn(f64) -> f64| -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let (s, c) = t.sin_cos();
                r(t) * Vec2::new(c, s)
            })
            .collect()
    };
    match shape {
        Shape::Circle { r0 } => {
            if !(*r0 > 0.0) {
                return Err(Error::InvalidConfiguration("circle radius must be positive".into()));
            }
            PointCloud::new(polar(&|_| *r0))
        }
        Shape::Asterisk => PointCloud::new(polar(&asterisk_radius)),
        Shape::Points(p) => PointCloud::new(p.clone()),
    }
}

/// Radius of the circle shrinking under curvature flow, `sqrt(r0^2 - 2t)`.
pub fn circle_radius(r0: f64, t: f64) -> f64 {
    (r0 * r0 - 2.0 * t).max(0.0).sqrt()
}

pub fn mean_radius(points: &[Vec2]) -> f64 {
    points.iter().map(|q| q.norm()).sum::<f64>() / points.len() as f64
}

/// Root mean square of `|q_i| - r` over the points.
pub fn radius_error(points: &[Vec2], r: f64) -> f64 {
    (points.iter().map(|q| (q.norm() - r).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
}

/// `max |q_i - c| - min |q_i - c|` about the centroid.
pub fn radial_range(points: &[Vec2]) -> f64 {
    let c = points.iter().sum::<Vec2>() / points.len() as f64;
    let (lo, hi) = points
        .iter()
        .map(|q| (q - c).norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    hi - lo
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    pub mean_radius: f64,
}

/// Evolves the circle of radius `r0` at each `N` to `t_end` without
/// resampling and reports the radius error against the analytic solution.
pub fn circle_convergence(
    r0: f64,
    ns: &[usize],
    dt: f64,
    t_end: f64,
    stencil_size: usize,
    degree: usize,
) -> Result<Vec<ConvergenceRow>> {
    let (core, bdy) = split_stencil_size(stencil_size);
    ns.iter()
        .map(|&n| {
            let pc = generate(&Shape::Circle { r0 }, n)?;
            let mut cfg = EvolutionConfig::for_cloud(&pc, dt, t_end);
            cfg.resample = None;
            cfg.core_size = core;
            cfg.boundary_size = bdy;
            cfg.degree = degree;
            let frames = run(pc, cfg).map_err(|e| e.source)?;
            let last = frames.last().expect("initial frame");
            let r = circle_radius(r0, last.time);
            Ok(ConvergenceRow {
                n,
                h: 2.0 * PI * r0 / n as f64,
                error: radius_error(&last.points, r),
                mean_radius: mean_radius(&last.points),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamRow {
    pub stencil_size: usize,
    pub degree: usize,
    pub normal_error: f64,
    pub curvature_error: f64,
}

/// Max-norm errors of the outward normal and curvature on the unit circle
/// with `n` points for every `(m, p)` with `2 <= p <= m - 1`.
pub fn circle_param_study(n: usize, stencil_sizes: &[usize], degrees: &[usize]) -> Result<Vec<ParamRow>> {
    let pc = generate(&Shape::Circle { r0: 1.0 }, n)?;
    let mut rows = Vec::new();
    for &m in stencil_sizes {
        for &p in degrees.iter().filter(|&&p| p >= 2 && p < m) {
            let (core, bdy) = split_stencil_size(m);
            let mut normal_error: f64 = 0.0;
            let mut curvature_error: f64 = 0.0;
            for ix in partition(n, core, bdy)? {
                let (s, _) = Stencil::fit(ix, pc.points(), p, None)?;
                for g in core_geometry(&s, 1.0)? {
                    let q = pc.points()[g.point_index];
                    normal_error = normal_error.max((g.normal - q / q.norm()).norm());
                    curvature_error = curvature_error.max((g.signed_curvature - 1.0).abs());
                }
            }
            rows.push(ParamRow { stencil_size: m, degree: p, normal_error, curvature_error });
        }
    }
    Ok(rows)
}

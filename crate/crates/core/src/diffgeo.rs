//! Normals, curvature and arc length from fitted stencil curves.
//!
//! Orientation convention: clouds are counterclockwise (`orientation = +1`),
//! `n̂` points outward and the signed curvature `κ_s` is positive where the
//! curve is locally convex. The curvature vector is `-κ_s n̂`.

use crate::curve::{CurveJet, Vec2};
use crate::error::{Error, Result};
use crate::fit::Stencil;

/// Tangents shorter than this are treated as vanishing.
const MIN_TANGENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometrySample {
    pub point_index: usize,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub curvature: f64,
    pub signed_curvature: f64,
}

/// `+1` for counterclockwise point order, `-1` otherwise.
pub fn orientation_of(points: &[Vec2]) -> f64 {
    if crate::cover::signed_area(points) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn outward(d1: Vec2, orientation: f64, u: f64) -> Result<(Vec2, Vec2)> {
    let len = d1.norm();
    if !(len > MIN_TANGENT) {
        return Err(Error::DegenerateTangent { u });
    }
    let tangent = d1 / len;
    // (-f2', f1') is the left normal; for a counterclockwise traversal it points inward
    let left = Vec2::new(-tangent.y, tangent.x);
    Ok((-orientation * left, tangent))
}

fn signed_curvature(d1: Vec2, d2: Vec2, orientation: f64, u: f64) -> Result<f64> {
    let speed2 = d1.norm_squared();
    if !(speed2.sqrt() > MIN_TANGENT) {
        return Err(Error::DegenerateTangent { u });
    }
    Ok(orientation * (d1.x * d2.y - d1.y * d2.x) / speed2.powf(1.5))
}

/// Unit outward normal at `u`.
pub fn normal_at(jet: &CurveJet, u: f64, orientation: f64) -> Result<Vec2> {
    Ok(outward(jet.first(u)?, orientation, u)?.0)
}

/// `(κ, κ_s)` at `u`.
pub fn curvature_at(jet: &CurveJet, u: f64, orientation: f64) -> Result<(f64, f64)> {
    let p = jet.curve().degree();
    if p < 2 {
        return Err(Error::InvalidDegree(p));
    }
    let ks = signed_curvature(jet.first(u)?, jet.second(u)?, orientation, u)?;
    Ok((ks.abs(), ks))
}

/// Normal, tangent and both curvatures at one parameter.
pub fn sample_at(jet: &CurveJet, u: f64, orientation: f64, point_index: usize) -> Result<GeometrySample> {
    let p = jet.curve().degree();
    if p < 2 {
        return Err(Error::InvalidDegree(p));
    }
    let d1 = jet.first(u)?;
    let (normal, tangent) = outward(d1, orientation, u)?;
    let ks = signed_curvature(d1, jet.second(u)?, orientation, u)?;
    Ok(GeometrySample { point_index, normal, tangent, curvature: ks.abs(), signed_curvature: ks })
}

/// Geometry at every core point of a stencil.
pub fn core_geometry(stencil: &Stencil, orientation: f64) -> Result<Vec<GeometrySample>> {
    let jet = stencil.curve().jet()?;
    let ix = stencil.indices();
    ix.core_locals()
        .map(|l| sample_at(&jet, stencil.params()[l], orientation, ix.global(l)))
        .collect()
}

/// Sum of consecutive chord lengths; `closed` adds the segment back to the
/// first point.
pub fn arc_length(points: &[Vec2], closed: bool) -> f64 {
    let open: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if closed && points.len() > 1 {
        open + (points[0] - points[points.len() - 1]).norm()
    } else {
        open
    }
}

/// Surface divergence of a purely normal velocity `v_n n̂`.
pub fn tangential_divergence(signed_curvature: f64, normal_speed: f64) -> f64 {
    signed_curvature * normal_speed
}

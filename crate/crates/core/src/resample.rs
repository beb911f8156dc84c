//! Point spacing maintenance: removal of crowded points, insertion into
//! wide gaps and redistribution to equal chords along the stencil curves.
//!
//! Every operation reports where each output point came from relative to
//! the input cloud ([`Origin`]) so nodal fields can follow the points.

use crate::cover::{PointCloud, StencilIndices};
use crate::curve::Vec2;
use crate::diffgeo::arc_length;
use crate::error::{Error, Result};
use crate::fit::Stencil;

/// Location of an output point on the input polygon: on gap `segment`
/// (from point `segment` to `segment + 1`) at arc fraction `frac`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Origin {
    pub segment: usize,
    pub frac: f64,
}

impl Origin {
    pub fn node(i: usize) -> Self {
        Self { segment: i, frac: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resampled {
    pub cloud: PointCloud,
    pub origin: Vec<Origin>,
}

impl Resampled {
    pub fn changed(&self, input_len: usize) -> bool {
        self.cloud.len() != input_len || self.origin.iter().enumerate().any(|(i, o)| *o != Origin::node(i))
    }

    /// Transfers a nodal field by linear interpolation along each gap.
    pub fn transfer(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        self.origin
            .iter()
            .map(|o| values[o.segment] * (1.0 - o.frac) + values[(o.segment + 1) % n] * o.frac)
            .collect()
    }
}

/// One cyclic pass dropping `q_{i+1}` whenever it sits closer than
/// `d_tol_min` to the last kept point. Never shrinks below `min_points`.
pub fn remove_close(pc: &PointCloud, d_tol_min: f64, min_points: usize) -> Resampled {
    let pts = pc.points();
    let n = pts.len();
    let mut kept = vec![0usize];
    let mut remaining = n;
    for i in 1..n {
        let last = pts[*kept.last().unwrap()];
        if (pts[i] - last).norm() < d_tol_min && remaining > min_points {
            remaining -= 1;
        } else {
            kept.push(i);
        }
    }
    // closing gap: drop the last kept point rather than the anchor q_0
    if kept.len() > 1 && remaining > min_points {
        let last = *kept.last().unwrap();
        if (pts[0] - pts[last]).norm() < d_tol_min {
            kept.pop();
        }
    }
    Resampled {
        cloud: PointCloud::from_ccw(kept.iter().map(|&i| pts[i]).collect()),
        origin: kept.into_iter().map(Origin::node).collect(),
    }
}

/// Parameter interval of gap `i` on the stencil owning point `i`, or `None`
/// when `q_{i+1}` lies outside that stencil.
fn gap_params(stencils: &[Stencil], owner: &[usize], i: usize, n: usize) -> Option<(usize, f64, f64)> {
    let k = owner[i];
    let s = &stencils[k];
    let ix: &StencilIndices = s.indices();
    let a = ix.local_of(i)?;
    let b = ix.local_of((i + 1) % n)?;
    (b == a + 1).then(|| (k, s.params()[a], s.params()[b]))
}

/// Core owner of every cloud index.
fn owners(stencils: &[Stencil], n: usize) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; n];
    for (k, s) in stencils.iter().enumerate() {
        if s.indices().cloud_len != n {
            return Err(Error::InvalidConfiguration("stencils do not match the cloud".into()));
        }
        for i in s.indices().core_indices() {
            owner[i] = k;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::InvalidConfiguration("stencil cores do not cover the cloud".into()));
    }
    Ok(owner)
}

/// Piecewise curve through the cloud: gap `i` follows the curve of the
/// stencil owning `q_i`, or the chord when the gap leaves that stencil.
struct Composite<'a> {
    stencils: &'a [Stencil],
    pts: &'a [Vec2],
    gaps: Vec<Option<(usize, f64, f64)>>,
}

impl<'a> Composite<'a> {
    fn new(stencils: &'a [Stencil], pc: &'a PointCloud) -> Result<Self> {
        let n = pc.len();
        let owner = owners(stencils, n)?;
        let gaps = (0..n).map(|i| gap_params(stencils, &owner, i, n)).collect();
        Ok(Self { stencils, pts: pc.points(), gaps })
    }

    fn len(&self) -> usize {
        self.pts.len()
    }

    /// Point at composite parameter `s` in `[0, n]`.
    fn at(&self, s: f64) -> Result<Vec2> {
        let n = self.len();
        let seg = (s.floor() as usize).min(n - 1);
        let t = s - seg as f64;
        self.on_gap(seg, t)
    }

    fn on_gap(&self, seg: usize, t: f64) -> Result<Vec2> {
        let n = self.len();
        if t <= 0.0 {
            return Ok(self.pts[seg]);
        }
        if t >= 1.0 {
            return Ok(self.pts[(seg + 1) % n]);
        }
        match self.gaps[seg] {
            Some((k, ua, ub)) => self.stencils[k].curve().eval(ua + t * (ub - ua)),
            None => Ok(self.pts[seg] * (1.0 - t) + self.pts[(seg + 1) % n] * t),
        }
    }

    fn origin_of(&self, s: f64, q: Vec2) -> Origin {
        let n = self.len();
        let seg = (s.floor() as usize).min(n - 1);
        let da = (q - self.pts[seg]).norm();
        let db = (self.pts[(seg + 1) % n] - q).norm();
        let frac = if da + db > 0.0 { da / (da + db) } else { 0.0 };
        Origin { segment: seg, frac }
    }
}

/// Splits every gap longer than `d_tol_max` by inserting curve points at
/// evenly spaced parameters of the owning stencil.
pub fn insert_far(stencils: &[Stencil], pc: &PointCloud, d_tol_max: f64) -> Result<Resampled> {
    let comp = Composite::new(stencils, pc)?;
    let pts = pc.points();
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for i in 0..n {
        out.push(pts[i]);
        origin.push(Origin::node(i));
        let gap = (pts[(i + 1) % n] - pts[i]).norm();
        if gap <= d_tol_max {
            continue;
        }
        let pieces = (gap / d_tol_max).ceil() as usize;
        let new: Vec<Vec2> = (1..pieces)
            .map(|j| comp.on_gap(i, j as f64 / pieces as f64))
            .collect::<Result<_>>()?;
        // arc fractions along the refined polyline of this gap
        let mut chain = vec![pts[i]];
        chain.extend(&new);
        chain.push(pts[(i + 1) % n]);
        let lengths: Vec<f64> = chain.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = lengths.iter().sum();
        let mut acc = 0.0;
        for (q, len) in new.into_iter().zip(&lengths) {
            acc += len;
            out.push(q);
            origin.push(Origin { segment: i, frac: acc / total });
        }
    }
    Ok(Resampled { cloud: PointCloud::from_ccw(out), origin })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Redistribution {
    pub result: Resampled,
    pub target: f64,
    /// Common chord length of the redistributed cloud.
    pub chord: f64,
    /// Set when the equal-chord march could not be bracketed; the input
    /// cloud is returned unchanged.
    pub skipped: bool,
}

/// Re-places the points along the composite stencil curve so that all
/// consecutive chords are equal, keeping `q_0` and the point count. The
/// common chord is within `eps_d` of `L / N` unless the report says
/// otherwise.
pub fn redistribute(stencils: &[Stencil], pc: &PointCloud, eps_d: f64) -> Result<Redistribution> {
    if !(eps_d > 0.0) {
        return Err(Error::InvalidConfiguration("redistribution tolerance must be positive".into()));
    }
    let comp = Composite::new(stencils, pc)?;
    let n = pc.len();
    let target = arc_length(pc.points(), true) / n as f64;
    let unchanged = || Resampled { cloud: pc.clone(), origin: (0..n).map(Origin::node).collect() };

    let closing = |d: f64| -> Result<Option<(f64, Vec<f64>)>> {
        march(&comp, d).map(|r| r.map(|(params, last)| ((comp.pts[0] - last).norm() - d, params)))
    };

    // closing residual decreases with the chord; bracket it around the target
    let (mut lo, mut hi) = (0.8 * target, 1.2 * target);
    let g_lo = match closing(lo)? {
        Some((g, _)) if g > 0.0 => g,
        _ => return Ok(Redistribution { result: unchanged(), target, chord: target, skipped: true }),
    };
    let g_hi = match closing(hi)? {
        Some((g, _)) if g < 0.0 => g,
        None => -1.0,
        _ => return Ok(Redistribution { result: unchanged(), target, chord: target, skipped: true }),
    };
    let (mut f_lo, mut f_hi) = (g_lo, g_hi);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..200 {
        // regula falsi with bisection fallback when the march overruns
        let mut d = if f_hi > -1.0 { lo - f_lo * (hi - lo) / (f_hi - f_lo) } else { 0.5 * (lo + hi) };
        if !(d > lo && d < hi) {
            d = 0.5 * (lo + hi);
        }
        match closing(d)? {
            Some((g, params)) => {
                let done = g.abs() <= 1e-13 * target || hi - lo <= 1e-14 * target;
                if g > 0.0 {
                    lo = d;
                    f_lo = g;
                    f_hi = if f_hi > -1.0 { 0.5 * f_hi } else { f_hi };
                } else {
                    hi = d;
                    f_hi = g;
                    f_lo *= 0.5;
                }
                best = Some((d, params));
                if done {
                    break;
                }
            }
            None => {
                hi = d;
                f_hi = -1.0;
            }
        }
    }
    let Some((chord, params)) = best else {
        return Ok(Redistribution { result: unchanged(), target, chord: target, skipped: true });
    };
    let mut points = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for &s in &params {
        let q = comp.at(s)?;
        origin.push(comp.origin_of(s, q));
        points.push(q);
    }
    Ok(Redistribution {
        result: Resampled { cloud: PointCloud::from_ccw(points), origin },
        target,
        chord,
        skipped: false,
    })
}

/// Walks `n - 1` chords of length `d` from `q_0` along the composite curve.
/// Returns the composite parameters of all `n` points and the last point,
/// or `None` if the walk runs past the end of the curve.
fn march(comp: &Composite, d: f64) -> Result<Option<(Vec<f64>, Vec2)>> {
    let n = comp.len();
    let end = n as f64;
    let step = 0.25f64;
    let mut params = Vec::with_capacity(n);
    params.push(0.0);
    let mut s = 0.0;
    let mut here = comp.at(0.0)?;
    for _ in 1..n {
        let mut a = s;
        let mut b: f64 = s;
        loop {
            b = (b + step).min(end);
            if (comp.at(b)? - here).norm() >= d {
                break;
            }
            if b >= end {
                return Ok(None);
            }
            a = b;
        }
        while b - a > 1e-13 * end {
            let mid = 0.5 * (a + b);
            if (comp.at(mid)? - here).norm() < d {
                a = mid;
            } else {
                b = mid;
            }
        }
        s = 0.5 * (a + b);
        if s >= end {
            return Ok(None);
        }
        here = comp.at(s)?;
        params.push(s);
    }
    Ok(Some((params, here)))
}

/// True when some gap lies outside `[d_tol_min, d_tol_max]`.
pub fn needs_resampling(pc: &PointCloud, d_tol_min: f64, d_tol_max: f64) -> bool {
    pc.gaps().iter().any(|&g| g < d_tol_min || g > d_tol_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::partition;
    use std::f64::consts::PI;

    fn circle_at(angles: &[f64]) -> PointCloud {
        PointCloud::new(angles.iter().map(|t| Vec2::new(t.cos(), t.sin())).collect()).unwrap()
    }

    fn uniform_angles(n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
    }

    fn fit_all(pc: &PointCloud) -> Vec<Stencil> {
        partition(pc.len(), 5, 4)
            .unwrap()
            .into_iter()
            .map(|ix| Stencil::fit(ix, pc.points(), 7, None).unwrap().0)
            .collect()
    }

    #[test]
    fn removal_leaves_sparse_cloud_alone() {
        let pc = circle_at(&uniform_angles(50));
        let spacing = pc.gaps()[0];
        let r = remove_close(&pc, spacing / 2.0, 4);
        assert_eq!(r.cloud, pc);
        assert!(!r.changed(50));
    }

    #[test]
    fn removal_of_duplicated_pair() {
        let mut a = uniform_angles(40);
        a.insert(11, a[10] + 1e-6);
        let pc = circle_at(&a);
        let r = remove_close(&pc, 1e-3, 4);
        assert_eq!(r.cloud.len(), 40);
    }

    #[test]
    fn removal_clears_a_cluster() {
        let mut a = uniform_angles(45);
        let d_min = 0.05;
        for j in 1..=5 {
            a.push(a[20] + 0.008 * j as f64);
        }
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let pc = circle_at(&a);
        let r = remove_close(&pc, d_min, 4);
        assert!(r.cloud.gaps().iter().all(|&g| g >= d_min));
        assert_eq!(r.cloud.len(), 45);
    }

    #[test]
    fn removal_respects_floor() {
        let pc = circle_at(&uniform_angles(40));
        let r = remove_close(&pc, 10.0, 28);
        assert_eq!(r.cloud.len(), 28);
    }

    #[test]
    fn insertion_on_circle() {
        let mut a = uniform_angles(40);
        a.remove(7);
        let pc = circle_at(&a);
        let stencils = fit_all(&pc);
        let spacing = 2.0 * PI / 40.0;
        assert_eq!(insert_far(&stencils, &pc, 3.0 * spacing).unwrap().cloud, pc);
        let r = insert_far(&stencils, &pc, 1.5 * spacing).unwrap();
        assert_eq!(r.cloud.len(), 40);
        let q = r.cloud.points()[7];
        // between-node interpolation error of the stencil curve
        assert!((q.norm() - 1.0).abs() < 1e-4);
        assert_eq!(r.origin[7].segment, 6);
        assert!((r.origin[7].frac - 0.5).abs() < 1e-3);
    }

    #[test]
    fn insertion_on_a_line_hits_the_chord_midpoint() {
        // square loop with spacing 0.1 and one point missing on the bottom edge
        let mut pts = Vec::new();
        for side in 0..4 {
            for k in 0..12 {
                let s = k as f64 * 0.1;
                pts.push(match side {
                    0 => Vec2::new(s, 0.0),
                    1 => Vec2::new(1.2, s),
                    2 => Vec2::new(1.2 - s, 1.2),
                    _ => Vec2::new(0.0, 1.2 - s),
                });
            }
        }
        pts.remove(6);
        let pc = PointCloud::new(pts).unwrap();
        let stencils: Vec<Stencil> = partition(pc.len(), 3, 2)
            .unwrap()
            .into_iter()
            .map(|ix| Stencil::fit(ix, pc.points(), 2, None).unwrap().0)
            .collect();
        let r = insert_far(&stencils, &pc, 0.15).unwrap();
        assert_eq!(r.cloud.len(), 48);
        assert_eq!(r.origin[6], Origin { segment: 5, frac: r.origin[6].frac });
        assert!((r.cloud.points()[6] - Vec2::new(0.6, 0.0)).norm() < 1e-10, "{:?}", r.cloud.points()[6]);
    }

    #[test]
    fn redistribution_of_uniform_circle_is_still() {
        let pc = circle_at(&uniform_angles(40));
        let stencils = fit_all(&pc);
        let eps = 1e-3;
        let r = redistribute(&stencils, &pc, eps).unwrap();
        assert!(!r.skipped);
        for (a, b) in r.result.cloud.points().iter().zip(pc.points()) {
            assert!((a - b).norm() <= eps);
        }
    }

    #[test]
    fn redistribution_evens_out_perturbed_spacing() {
        let n = 60;
        let h = 2.0 * PI / n as f64;
        let a: Vec<f64> = (0..n).map(|i| i as f64 * h + 0.3 * h * ((i * 7 % 5) as f64 / 2.0 - 1.0)).collect();
        let pc = circle_at(&a);
        let stencils = fit_all(&pc);
        let eps = 1e-2 * h;
        let r = redistribute(&stencils, &pc, eps).unwrap();
        assert!(!r.skipped);
        assert_eq!(r.result.cloud.len(), n);
        let std = |g: &[f64]| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g.len() as f64).sqrt()
        };
        let before = pc.gaps();
        let after = r.result.cloud.gaps();
        assert!(std(&after) < std(&before));
        assert!(after.iter().all(|g| (g - r.target).abs() < eps));
        // points stay on the circle
        assert!(r.result.cloud.points().iter().all(|q| (q.norm() - 1.0).abs() < 1e-5));
        assert!(r.result.cloud.signed_area() > 0.0);
    }

    #[test]
    fn field_transfer_is_second_order() {
        let n = 80;
        let pc = circle_at(&uniform_angles(n));
        let stencils = fit_all(&pc);
        let r = insert_far(&stencils, &pc, 0.5 * 2.0 * PI / n as f64).unwrap();
        let field: Vec<f64> = pc.points().iter().map(|q| q.y.atan2(q.x).sin()).collect();
        let moved = r.transfer(&field);
        let h = 2.0 * PI / n as f64;
        for (q, v) in r.cloud.points().iter().zip(moved) {
            assert!((q.y.atan2(q.x).sin() - v).abs() <= h * h);
        }
    }
}

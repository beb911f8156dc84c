//! Point clouds on closed curves and their partition into core covers and
//! overlapping stencils.

use crate::curve::Vec2;
use crate::error::{Error, Result};

/// Ordered cyclic samples of a closed curve, stored counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec2>,
}

impl PointCloud {
    pub const MIN_POINTS: usize = 4;

    /// Validates the samples and reorders them counterclockwise if needed.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < Self::MIN_POINTS {
            return Err(Error::DegenerateData(format!(
                "a closed cloud needs at least {} points, got {}",
                Self::MIN_POINTS,
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateData("non-finite coordinate".into()));
        }
        let n = points.len();
        for i in 0..n {
            if points[i] == points[(i + 1) % n] {
                return Err(Error::DegenerateData(format!(
                    "points {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        let mut cloud = Self { points };
        cloud.canonicalize();
        Ok(cloud)
    }

    /// Builds a cloud without reordering. Used internally where the order is
    /// already known to be counterclockwise.
    pub(crate) fn from_ccw(points: Vec<Vec2>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    pub fn get(&self, i: usize) -> Vec2 {
        self.points[i % self.points.len()]
    }

    /// Shoelace signed area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn centroid(&self) -> Vec2 {
        self.points.iter().sum::<Vec2>() / self.points.len() as f64
    }

    /// Reverses the order (keeping the first point first) if the traversal is
    /// clockwise. Returns whether a reversal happened.
    pub fn canonicalize(&mut self) -> bool {
        if self.signed_area() < 0.0 {
            self.points[1..].reverse();
            true
        } else {
            false
        }
    }

    /// Distances `|q_{i+1} - q_i|` including the closing gap.
    pub fn gaps(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n).map(|i| (self.points[(i + 1) % n] - self.points[i]).norm()).collect()
    }
}

pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

/// Index layout of one stencil: a contiguous cyclic core plus boundary
/// neighbors on either side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StencilIndices {
    /// Size of the cloud the indices refer to.
    pub cloud_len: usize,
    pub core_start: usize,
    pub core_len: usize,
    pub left: usize,
    pub right: usize,
}

impl StencilIndices {
    /// Total stencil size `m_k`.
    pub fn len(&self) -> usize {
        self.left + self.core_len + self.right
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cloud index of the first stencil point.
    pub fn start(&self) -> usize {
        (self.core_start + self.cloud_len - self.left) % self.cloud_len
    }

    /// Cloud index of local stencil position `local`.
    pub fn global(&self, local: usize) -> usize {
        (self.start() + local) % self.cloud_len
    }

    /// Every stencil index in traversal order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(|l| self.global(l))
    }

    pub fn core_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.core_len).map(|c| (self.core_start + c) % self.cloud_len)
    }

    pub fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.left)
            .chain(self.left + self.core_len..self.len())
            .map(|l| self.global(l))
    }

    /// Local stencil positions of the core points.
    pub fn core_locals(&self) -> std::ops::Range<usize> {
        self.left..self.left + self.core_len
    }

    /// Local position of cloud index `i`, if it belongs to the stencil.
    pub fn local_of(&self, i: usize) -> Option<usize> {
        let offset = (i + self.cloud_len - self.start()) % self.cloud_len;
        (offset < self.len()).then_some(offset)
    }

    pub fn contains_core(&self, i: usize) -> bool {
        (i + self.cloud_len - self.core_start) % self.cloud_len < self.core_len
    }
}

/// Splits `0..n` into consecutive cores of `core_size` points and extends
/// each by `boundary_size / 2` neighbors per side.
///
/// The last core takes the remainder; a remainder of one point is merged
/// into the previous core.
pub fn partition(n: usize, core_size: usize, boundary_size: usize) -> Result<Vec<StencilIndices>> {
    if core_size == 0 {
        return Err(Error::InvalidConfiguration("core size must be at least 1".into()));
    }
    if !boundary_size.is_multiple_of(2) {
        return Err(Error::InvalidConfiguration(format!(
            "boundary size must be even, got {boundary_size}"
        )));
    }
    if core_size + boundary_size > n {
        return Err(Error::InvalidConfiguration(format!(
            "stencil of {} points exceeds the cloud size {n}",
            core_size + boundary_size
        )));
    }
    let mut cores = Vec::new();
    let mut start = 0;
    while start < n {
        let len = core_size.min(n - start);
        cores.push((start, len));
        start += len;
    }
    if cores.len() > 1 && cores.last().unwrap().1 == 1 {
        cores.pop();
        cores.last_mut().unwrap().1 += 1;
    }
    let half = boundary_size / 2;
    Ok(cores
        .into_iter()
        .map(|(core_start, core_len)| {
            // a merged core can push the stencil past the cloud size; trim the right side
            let excess = (core_len + boundary_size).saturating_sub(n);
            StencilIndices {
                cloud_len: n,
                core_start,
                core_len,
                left: half,
                right: half - excess.min(half),
            }
        })
        .collect())
}

/// Label `k(i)` of the unique core containing point `i`.
pub fn stencil_of(stencils: &[StencilIndices], i: usize) -> Option<usize> {
    stencils.iter().position(|s| s.contains_core(i))
}

/// Splits a total stencil size into `(core_size, boundary_size)`: the
/// boundary takes `2 * floor(m / 4)` points, the core the rest.
pub fn split_stencil_size(m: usize) -> (usize, usize) {
    let boundary = 2 * (m / 4);
    (m - boundary, boundary)
}

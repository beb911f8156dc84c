//! Degree-p B-spline primitives over clamped knot vectors.
//!
//! Indices are zero-based throughout: a curve with `n` control points uses
//! basis functions `0..n` and a knot vector of length `n + p + 1`. Knot
//! vectors built here live on `[0, 1]`; knot insertion keeps them there.

use crate::error::{Error, Result};
use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

/// Largest supported degree + 1. Basis evaluation works on stack buffers of
/// this size.
pub const MAX_ORDER: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Wraps an explicit knot sequence.
    ///
    /// The sequence must be nondecreasing, hold at least `2 (p + 1)` values,
    /// have no knot repeated more than `p + 1` times and span a nonempty
    /// evaluable range `[knots[p], knots[n]]`.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if degree + 1 > MAX_ORDER {
            return Err(Error::InvalidConfiguration(format!(
                "degree {degree} exceeds the supported maximum {}",
                MAX_ORDER - 1
            )));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidConfiguration(format!(
                "{} knots cannot carry a degree-{degree} basis",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidConfiguration("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfiguration("knots must be nondecreasing".into()));
        }
        let mut run = 1;
        for w in knots.windows(2) {
            run = if w[1] == w[0] { run + 1 } else { 1 };
            if run > degree + 1 {
                return Err(Error::Multiplicity { u: w[0], multiplicity: run, degree });
            }
        }
        let kv = Self { knots, degree };
        let (a, b) = kv.domain();
        if b <= a {
            return Err(Error::InvalidConfiguration("empty evaluable range".into()));
        }
        Ok(kv)
    }

    /// Open-uniform knot vector on `[0, 1]` for `count` control points: `p + 1`
    /// zeros, `p + 1` ones and uniformly spaced interior knots.
    pub fn clamped(count: usize, degree: usize) -> Result<Self> {
        if count < degree + 1 {
            return Err(Error::InvalidConfiguration(format!(
                "{count} control points cannot define a degree-{degree} curve"
            )));
        }
        let spans = count - degree;
        let mut knots = Vec::with_capacity(count + degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        knots.extend((1..spans).map(|i| i as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Evaluable parameter range `[knots[p], knots[n]]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.control_count()])
    }

    /// Number of times `u` appears in the knot sequence.
    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Knot span index `s` with `knots[s] <= u < knots[s + 1]`. The right end
    /// of the domain maps to the last nonempty span.
    pub fn span(&self, u: f64) -> Result<usize> {
        let (a, b) = self.domain();
        if !(u >= a && u <= b) {
            return Err(Error::OutOfDomain { u, lower: a, upper: b });
        }
        let n = self.control_count();
        let p = self.degree;
        if u == b {
            let mut s = n - 1;
            while self.knots[s] == self.knots[s + 1] {
                s -= 1;
            }
            return Ok(s);
        }
        // largest s in [p, n-1] with knots[s] <= u
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// The `p + 1` nonzero basis values on `span`, for indices
    /// `span - p ..= span`, via the triangular de Boor scheme.
    pub fn basis_functions(&self, span: usize, u: f64, out: &mut [f64]) {
        let p = self.degree;
        let k = &self.knots;
        let mut left = [0.0; MAX_ORDER];
        let mut right = [0.0; MAX_ORDER];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = u - k[span + 1 - j];
            right[j] = k[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// Value of basis function `j` at `u`.
    pub fn basis(&self, j: usize, u: f64) -> Result<f64> {
        let n = self.control_count();
        if j >= n {
            return Err(Error::InvalidConfiguration(format!(
                "basis index {j} out of range for {n} functions"
            )));
        }
        let span = self.span(u)?;
        let p = self.degree;
        if j + p < span || j > span {
            return Ok(0.0);
        }
        let mut values = [0.0; MAX_ORDER];
        self.basis_functions(span, u, &mut values);
        Ok(values[j + p - span])
    }

    /// Greville abscissae: the average of the `p` knots following each
    /// control index.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.control_count())
                .map(|j| 0.5 * (self.knots[j] + self.knots[j + 1]))
                .collect();
        }
        (0..self.control_count())
            .map(|j| self.knots[j + 1..=j + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Distinct knot values strictly inside the evaluable range, plus both
    /// ends: the breakpoints of the piecewise polynomial.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.domain();
        let mut out = vec![a];
        for &k in &self.knots {
            if k > *out.last().unwrap() && k <= b {
                out.push(k);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BSplineCurve {
    knots: KnotVector,
    control_points: Vec<Vec2>,
}

impl BSplineCurve {
    pub fn new(knots: KnotVector, control_points: Vec<Vec2>) -> Result<Self> {
        if control_points.len() != knots.control_count() {
            return Err(Error::InvalidConfiguration(format!(
                "{} control points given, knot vector expects {}",
                control_points.len(),
                knots.control_count()
            )));
        }
        Ok(Self { knots, control_points })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn control_points(&self) -> &[Vec2] {
        &self.control_points
    }

    pub fn control_points_mut(&mut self) -> &mut [Vec2] {
        &mut self.control_points
    }

    pub fn domain(&self) -> (f64, f64) {
        self.knots.domain()
    }

    pub fn eval(&self, u: f64) -> Result<Vec2> {
        let span = self.knots.span(u)?;
        Ok(self.eval_on_span(span, u))
    }

    fn eval_on_span(&self, span: usize, u: f64) -> Vec2 {
        let p = self.knots.degree;
        let mut values = [0.0; MAX_ORDER];
        self.knots.basis_functions(span, u, &mut values);
        let base = span - p;
        values[..=p]
            .iter()
            .zip(&self.control_points[base..=span])
            .fold(Vec2::zeros(), |acc, (w, q)| acc + q * *w)
    }

    /// Derivative curve (hodograph) of degree `p - 1`, built by differencing
    /// consecutive control points.
    pub fn derivative(&self) -> Result<BSplineCurve> {
        let p = self.degree();
        if p == 0 {
            return Err(Error::InvalidOrder { order: 1, degree: 0 });
        }
        let k = self.knots.knots();
        let pf = p as f64;
        let points = self
            .control_points
            .windows(2)
            .enumerate()
            .map(|(j, w)| {
                let denom = k[j + p + 1] - k[j + 1];
                if denom == 0.0 {
                    Vec2::zeros()
                } else {
                    (w[1] - w[0]) * (pf / denom)
                }
            })
            .collect();
        let knots = KnotVector { knots: k[1..k.len() - 1].to_vec(), degree: p - 1 };
        Ok(BSplineCurve { knots, control_points: points })
    }

    /// Exact derivatives `[f'(u), f''(u), ...]` up to `order`.
    pub fn derivatives(&self, u: f64, order: usize) -> Result<Vec<Vec2>> {
        if order > self.degree() {
            return Err(Error::InvalidOrder { order, degree: self.degree() });
        }
        // validate u against this curve's domain, not the hodograph's
        self.knots.span(u)?;
        let mut out = Vec::with_capacity(order);
        let mut current = self.clone();
        for _ in 0..order {
            current = current.derivative()?;
            out.push(current.eval(u)?);
        }
        Ok(out)
    }

    /// Boehm insertion of a single knot. The returned curve has one more
    /// control point and the same trace.
    pub fn insert_knot(&self, u: f64) -> Result<BSplineCurve> {
        let (a, b) = self.domain();
        if !(u > a && u < b) {
            return Err(Error::OutOfDomain { u, lower: a, upper: b });
        }
        let p = self.degree();
        let s = self.knots.multiplicity(u);
        if s + 1 > p {
            return Err(Error::Multiplicity { u, multiplicity: s, degree: p });
        }
        let k = self.knots.span(u)?;
        let knots = self.knots.knots();
        let old = &self.control_points;
        let n = old.len();

        let mut points = Vec::with_capacity(n + 1);
        points.extend_from_slice(&old[..=k - p]);
        for i in k - p + 1..=k - s {
            let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
            points.push(old[i - 1] * (1.0 - alpha) + old[i] * alpha);
        }
        points.extend_from_slice(&old[k - s..]);

        let mut new_knots = Vec::with_capacity(knots.len() + 1);
        new_knots.extend_from_slice(&knots[..=k]);
        new_knots.push(u);
        new_knots.extend_from_slice(&knots[k + 1..]);

        Ok(BSplineCurve {
            knots: KnotVector { knots: new_knots, degree: p },
            control_points: points,
        })
    }

    pub fn control_polygon(&self) -> ControlPolygon {
        ControlPolygon { vertices: self.control_points.clone(), greville: self.knots.greville() }
    }

    /// Curve plus its first two derivative curves, for repeated geometric
    /// evaluation.
    pub fn jet(&self) -> Result<CurveJet> {
        let first = self.derivative()?;
        let second = if first.degree() > 0 { Some(first.derivative()?) } else { None };
        Ok(CurveJet { curve: self.clone(), first, second })
    }
}

/// A curve with cached hodographs.
#[derive(Clone, Debug)]
pub struct CurveJet {
    curve: BSplineCurve,
    first: BSplineCurve,
    second: Option<BSplineCurve>,
}

impl CurveJet {
    pub fn curve(&self) -> &BSplineCurve {
        &self.curve
    }

    pub fn point(&self, u: f64) -> Result<Vec2> {
        self.curve.eval(u)
    }

    pub fn first(&self, u: f64) -> Result<Vec2> {
        self.curve.knots.span(u)?;
        self.first.eval(u)
    }

    pub fn second(&self, u: f64) -> Result<Vec2> {
        match &self.second {
            Some(c) => {
                self.curve.knots.span(u)?;
                c.eval(u)
            }
            None => Err(Error::InvalidOrder { order: 2, degree: self.curve.degree() }),
        }
    }
}

/// Control polygon parameterized piecewise-linearly over the Greville
/// abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPolygon {
    pub vertices: Vec<Vec2>,
    pub greville: Vec<f64>,
}

impl ControlPolygon {
    pub fn eval(&self, u: f64) -> Vec2 {
        let g = &self.greville;
        let last = g.len() - 1;
        if u <= g[0] {
            return self.vertices[0];
        }
        if u >= g[last] {
            return self.vertices[last];
        }
        let i = g.partition_point(|&x| x <= u) - 1;
        let width = g[i + 1] - g[i];
        if width <= 0.0 {
            return self.vertices[i + 1];
        }
        let t = (u - g[i]) / width;
        self.vertices[i] * (1.0 - t) + self.vertices[i + 1] * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full Cox-de Boor recursion with the 0/0 = 0 convention.
    fn cox_de_boor(knots: &[f64], j: usize, p: usize, u: f64, right_end: bool) -> f64 {
        if p == 0 {
            let (a, b) = (knots[j], knots[j + 1]);
            if u >= a && u < b {
                return 1.0;
            }
            // closed right end on the last nonempty span
            if right_end && u == b && a < b && knots[j + 1..].iter().all(|&k| k == b) {
                return 1.0;
            }
            return 0.0;
        }
        let mut v = 0.0;
        let d1 = knots[j + p] - knots[j];
        if d1 != 0.0 {
            v += (u - knots[j]) / d1 * cox_de_boor(knots, j, p - 1, u, right_end);
        }
        let d2 = knots[j + p + 1] - knots[j + 1];
        if d2 != 0.0 {
            v += (knots[j + p + 1] - u) / d2 * cox_de_boor(knots, j + 1, p - 1, u, right_end);
        }
        v
    }

    fn curve(points: &[(f64, f64)], p: usize) -> BSplineCurve {
        let kv = KnotVector::clamped(points.len(), p).unwrap();
        BSplineCurve::new(kv, points.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn clamped_knot_examples() {
        assert_eq!(KnotVector::clamped(4, 3).unwrap().knots(), &[0., 0., 0., 0., 1., 1., 1., 1.]);
        assert_eq!(KnotVector::clamped(2, 1).unwrap().knots(), &[0., 0., 1., 1.]);
        let k = KnotVector::clamped(5, 2).unwrap();
        let expected = [0., 0., 0., 1. / 3., 2. / 3., 1., 1., 1.];
        for (a, b) in k.knots().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        for i in 0..=50 {
            let u = i as f64 / 50.0;
            let s: f64 = (0..5).map(|j| k.basis(j, u).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn clamped_rejects_too_few_points() {
        assert!(matches!(KnotVector::clamped(3, 3), Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn degree_zero_and_one_basis() {
        let k0 = KnotVector::new(vec![0.0, 1.0], 0).unwrap();
        assert_eq!(k0.basis(0, 0.5).unwrap(), 1.0);
        assert!(matches!(k0.basis(0, 1.5), Err(Error::OutOfDomain { .. })));
        let k1 = KnotVector::clamped(2, 1).unwrap();
        assert!((k1.basis(0, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_matches_recursive_oracle() {
        let knots = vec![0., 0., 0., 0., 0.2, 0.2, 0.5, 0.7, 1., 1., 1., 1.];
        let kv = KnotVector::new(knots.clone(), 3).unwrap();
        for i in 0..=200 {
            let u = i as f64 / 200.0;
            for j in 0..kv.control_count() {
                let fast = kv.basis(j, u).unwrap();
                let slow = cox_de_boor(&knots, j, 3, u, true);
                assert!((fast - slow).abs() < 1e-13, "j={j} u={u}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn endpoint_interpolation_and_affine_invariance() {
        let c = curve(&[(0., 0.), (1., 3.), (2., -1.), (4., 0.), (5., 2.)], 3);
        assert_eq!(c.eval(0.0).unwrap(), Vec2::new(0., 0.));
        assert!((c.eval(1.0).unwrap() - Vec2::new(5., 2.)).norm() < 1e-15);
        let flat = curve(&[(0., 0.), (1., 0.), (3., 0.), (4., 0.)], 3);
        for i in 0..=10 {
            assert_eq!(flat.eval(i as f64 / 10.0).unwrap().y, 0.0);
        }
        let constant = curve(&[(2., -1.); 6], 4);
        assert!((constant.eval(0.37).unwrap() - Vec2::new(2., -1.)).norm() < 1e-14);
        let d = constant.derivatives(0.37, 2).unwrap();
        assert!(d[0].norm() < 1e-12 && d[1].norm() < 1e-12);
    }

    #[test]
    fn linear_segment_derivative() {
        let c = curve(&[(0., 0.), (1., 2.)], 1);
        for u in [0.1, 0.5, 0.9] {
            assert_eq!(c.derivatives(u, 1).unwrap()[0], Vec2::new(1., 2.));
        }
        assert!(matches!(c.derivatives(0.5, 2), Err(Error::InvalidOrder { order: 2, degree: 1 })));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let c = curve(&[(0., 0.), (1., 2.), (2., -1.), (3., 3.), (4., 0.), (5., 1.), (6., 4.)], 4);
        let h = 1e-5;
        let interior = KnotVector::clamped(7, 4).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0 + 0.003;
            if interior.knots().iter().any(|k| (k - u).abs() < 2.0 * h) || u >= 1.0 {
                continue;
            }
            let d = c.derivatives(u, 2).unwrap();
            let fd1 = (c.eval(u + h).unwrap() - c.eval(u - h).unwrap()) / (2.0 * h);
            assert!((d[0] - fd1).norm() / d[0].norm() < 1e-6);
            let d1p = c.derivatives(u + h, 1).unwrap()[0];
            let d1m = c.derivatives(u - h, 1).unwrap()[0];
            let fd2 = (d1p - d1m) / (2.0 * h);
            assert!((d[1] - fd2).norm() / d[1].norm().max(1.0) < 1e-6);
        }
    }

    #[test]
    fn knot_insertion_examples() {
        let seg = curve(&[(0., 0.), (2., 0.)], 1);
        let refined = seg.insert_knot(0.5).unwrap();
        assert_eq!(refined.control_points().len(), 3);
        assert!((refined.control_points()[1] - Vec2::new(1., 0.)).norm() < 1e-15);

        let c = curve(&[(0., 0.), (1., 2.), (2., -1.), (3., 3.), (4., 0.)], 3);
        let r = c.insert_knot(0.3).unwrap();
        assert_eq!(r.control_points().len(), 6);
        for i in 0..1000 {
            let u = i as f64 / 999.0;
            assert!((c.eval(u).unwrap() - r.eval(u).unwrap()).norm() <= 1e-12);
        }
    }

    #[test]
    fn knot_insertion_multiplicity_limit() {
        let c = curve(&[(0., 0.), (1., 2.), (2., -1.), (3., 3.), (4., 0.)], 2);
        let once = c.insert_knot(0.4).unwrap();
        let twice = once.insert_knot(0.4).unwrap();
        assert!(matches!(twice.insert_knot(0.4), Err(Error::Multiplicity { .. })));
        assert!(matches!(c.insert_knot(1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn greville_lies_in_domain() {
        let kv = KnotVector::clamped(9, 7).unwrap();
        let g = kv.greville();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.0);
        assert!((g[8] - 1.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_local_support(
            degree in 1usize..8,
            extra in 0usize..10,
            u in 0.0f64..=1.0,
        ) {
            let kv = KnotVector::clamped(degree + 1 + extra, degree).unwrap();
            let mut sum = 0.0;
            for j in 0..kv.control_count() {
                let v = kv.basis(j, u).unwrap();
                prop_assert!(v >= 0.0);
                let k = kv.knots();
                if u < k[j] || u > k[j + degree + 1] {
                    prop_assert_eq!(v, 0.0);
                }
                sum += v;
            }
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn insertion_preserves_trace(
            seed_pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6..12),
            degree in 1usize..5,
            at in 0.01f64..0.99,
        ) {
            let c = curve(&seed_pts, degree);
            let r = c.insert_knot(at).unwrap();
            for i in 0..200 {
                let u = i as f64 / 199.0;
                prop_assert!((c.eval(u).unwrap() - r.eval(u).unwrap()).norm() <= 1e-12);
            }
        }
    }
}

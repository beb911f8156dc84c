//! Local stencil interpolation: chord-length parameters, component-wise
//! B-spline interpolation, the control-point deviation metric and
//! knot-insertion refinement of the control polygon.

use crate::cover::StencilIndices;
use crate::curve::{BSplineCurve, KnotVector, Vec2, MAX_ORDER};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, Dyn, OMatrix, U2};

/// Samples per knot span used to bracket roots of the foot-point polynomial.
const ROOT_SAMPLES: usize = 64;
/// Samples per knot span in the scan for the largest curve/polygon gap.
const GAP_SAMPLES: usize = 256;
/// Inserted knots closer than this to an existing knot are skipped.
const KNOT_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamAssignment {
    pub values: Vec<f64>,
    /// `|q_i - q_{i-1}|` for `i = 1..m`.
    pub chord_lengths: Vec<f64>,
    pub total: f64,
}

/// Chord-length parameters on `[0, 1]`.
pub fn chord_parameterize(points: &[Vec2]) -> Result<ParamAssignment> {
    if points.len() < 2 {
        return Err(Error::DegenerateData("need at least two points".into()));
    }
    let chord_lengths: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if let Some(i) = chord_lengths.iter().position(|&d| d <= 0.0) {
        return Err(Error::DegenerateData(format!("points {i} and {} coincide", i + 1)));
    }
    let total: f64 = chord_lengths.iter().sum();
    let mut values = Vec::with_capacity(points.len());
    values.push(0.0);
    let mut acc = 0.0;
    for d in &chord_lengths[..chord_lengths.len() - 1] {
        acc += d;
        values.push(acc / total);
    }
    values.push(1.0);
    Ok(ParamAssignment { values, chord_lengths, total })
}

/// Interpolates `points` with a clamped degree-`p` curve at chord-length
/// parameters.
pub fn interpolate_stencil(points: &[Vec2], degree: usize) -> Result<BSplineCurve> {
    let params = chord_parameterize(points)?;
    interpolate_at(points, &params.values, degree)
}

/// Interpolates `points` at the given parameters with a clamped
/// open-uniform knot vector. Both coordinates share one collocation matrix.
pub fn interpolate_at(points: &[Vec2], params: &[f64], degree: usize) -> Result<BSplineCurve> {
    let m = points.len();
    if m < degree + 1 {
        return Err(Error::InvalidConfiguration(format!(
            "{m} points cannot be interpolated with degree {degree}"
        )));
    }
    let knots = KnotVector::clamped(m, degree)?;
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut values = [0.0; MAX_ORDER];
    for (i, &u) in params.iter().enumerate() {
        let span = knots.span(u)?;
        knots.basis_functions(span, u, &mut values);
        for (r, &v) in values[..=degree].iter().enumerate() {
            a[(i, span - degree + r)] = v;
        }
    }
    let rhs = OMatrix::<f64, Dyn, U2>::from_fn(m, |i, j| points[i][j]);
    let solution = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::FitFailure(format!("singular collocation matrix (m = {m}, p = {degree})")))?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite control points".into()));
    }
    let control: Vec<Vec2> = (0..m).map(|i| Vec2::new(solution[(i, 0)], solution[(i, 1)])).collect();

    let residual = (&a * &solution - &rhs)
        .row_iter()
        .map(|r| (r[0] * r[0] + r[1] * r[1]).sqrt())
        .fold(0.0, f64::max);
    let scale = diameter(points).max(f64::MIN_POSITIVE);
    if residual > 1e-8 * scale {
        return Err(Error::FitFailure(format!(
            "ill-conditioned collocation matrix: residual {residual:e} (m = {m}, p = {degree})"
        )));
    }
    BSplineCurve::new(knots, control)
}

pub fn diameter(points: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Dense samples of `f` and `f'` shared by all control-point distance
/// queries on one curve.
struct FootPointTable {
    curve: BSplineCurve,
    first: BSplineCurve,
    /// `(span_start, span_end)` per nonempty knot span.
    spans: Vec<(f64, f64)>,
    /// For each span, `ROOT_SAMPLES + 1` samples of `(u, f(u), f'(u))`.
    samples: Vec<(f64, Vec2, Vec2)>,
}

impl FootPointTable {
    fn new(curve: &BSplineCurve) -> Result<Self> {
        let first = curve.derivative()?;
        let bp = curve.knots().breakpoints();
        let spans: Vec<(f64, f64)> = bp.windows(2).map(|w| (w[0], w[1])).collect();
        let mut samples = Vec::with_capacity(spans.len() * (ROOT_SAMPLES + 1));
        for &(a, b) in &spans {
            for s in 0..=ROOT_SAMPLES {
                let u = if s == ROOT_SAMPLES { b } else { a + (b - a) * s as f64 / ROOT_SAMPLES as f64 };
                samples.push((u, curve.eval(u)?, first.eval(u)?));
            }
        }
        Ok(Self { curve: curve.clone(), first, spans, samples })
    }

    fn foot(&self, p: &Vec2, u: f64) -> Result<f64> {
        Ok((p - self.curve.eval(u)?).dot(&self.first.eval(u)?))
    }

    /// Distance from `p` to the curve over the endpoints and the
    /// odd-multiplicity roots of `(p - f(u)) . f'(u)`.
    fn distance(&self, p: &Vec2) -> Result<f64> {
        let (a, b) = self.curve.domain();
        let mut best = (self.curve.eval(a)? - p).norm().min((self.curve.eval(b)? - p).norm());
        let stride = ROOT_SAMPLES + 1;
        for k in 0..self.spans.len() {
            let row = &self.samples[k * stride..(k + 1) * stride];
            let mut prev = (row[0].0, (p - row[0].1).dot(&row[0].2));
            for &(u, f, d) in &row[1..] {
                let val = (p - f).dot(&d);
                if val == 0.0 {
                    best = best.min((f - p).norm());
                } else if prev.1 != 0.0 && (val > 0.0) != (prev.1 > 0.0) {
                    let root = self.bisect(p, prev.0, u, prev.1)?;
                    best = best.min((self.curve.eval(root)? - p).norm());
                }
                prev = (u, val);
            }
        }
        Ok(best)
    }

    fn bisect(&self, p: &Vec2, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64> {
        let lo_positive = f_lo > 0.0;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            let v = self.foot(p, mid)?;
            if v == 0.0 {
                return Ok(mid);
            }
            if (v > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Distance between control point `j` and the curve.
pub fn control_point_distance(curve: &BSplineCurve, j: usize) -> Result<f64> {
    let p = curve.control_points().get(j).copied().ok_or_else(|| {
        Error::InvalidConfiguration(format!("control index {j} out of range"))
    })?;
    if curve.degree() == 0 {
        return Ok(0.0);
    }
    FootPointTable::new(curve)?.distance(&p)
}

/// Largest control-point distance over the control polygon.
pub fn deviation_metric(curve: &BSplineCurve) -> Result<f64> {
    let table = FootPointTable::new(curve)?;
    curve
        .control_points()
        .iter()
        .try_fold(0.0f64, |acc, p| Ok(acc.max(table.distance(p)?)))
}

/// Parameter where `|f(u) - Gamma(u)|` peaks, with `Gamma` the control
/// polygon over Greville abscissae.
pub fn max_polygon_gap(curve: &BSplineCurve) -> Result<(f64, f64)> {
    let polygon = curve.control_polygon();
    let gap = |u: f64| -> Result<f64> { Ok((curve.eval(u)? - polygon.eval(u)).norm()) };
    let bp = curve.knots().breakpoints();
    let mut grid = Vec::with_capacity((bp.len() - 1) * GAP_SAMPLES + 1);
    for w in bp.windows(2) {
        for s in 0..GAP_SAMPLES {
            grid.push(w[0] + (w[1] - w[0]) * s as f64 / GAP_SAMPLES as f64);
        }
    }
    grid.push(*bp.last().unwrap());
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &u) in grid.iter().enumerate() {
        let g = gap(u)?;
        if g > best.1 {
            best = (i, g);
        }
    }
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(grid.len() - 1)];
    let (u, g) = golden_max(gap, lo, hi, 1e-12)?;
    Ok(if g >= best.1 { (u, g) } else { (grid[best.0], best.1) })
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let u = 0.5 * (a + b);
    Ok((u, f(u)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineReport {
    /// Deviation metric before each insertion, then after the last one.
    pub history: Vec<f64>,
    pub insertions: usize,
    pub tolerance_met: bool,
}

impl RefineReport {
    pub fn deviation(&self) -> f64 {
        *self.history.last().unwrap()
    }
}

/// Inserts knots where the control polygon strays furthest from the curve
/// until the deviation metric drops to `eps_tol` or `max_insertions` knots
/// have been added.
pub fn refine_control_polygon(
    curve: &BSplineCurve,
    eps_tol: f64,
    max_insertions: usize,
) -> Result<(BSplineCurve, RefineReport)> {
    if !(eps_tol > 0.0) {
        return Err(Error::InvalidConfiguration("deviation tolerance must be positive".into()));
    }
    let mut current = curve.clone();
    let mut history = vec![deviation_metric(&current)?];
    let mut insertions = 0;
    while *history.last().unwrap() > eps_tol && insertions < max_insertions {
        let (mut u, _) = max_polygon_gap(&current)?;
        let bp = current.knots().breakpoints();
        if let Some(k) = bp.iter().position(|b| (b - u).abs() < KNOT_SNAP) {
            // peak sits on a knot: split the neighboring span with the larger gap
            let polygon = current.control_polygon();
            let mut best = (f64::NEG_INFINITY, u);
            for (a, b) in [(k.wrapping_sub(1), k), (k, k + 1)] {
                if a < bp.len() && b < bp.len() {
                    let mid = 0.5 * (bp[a] + bp[b]);
                    let g = (current.eval(mid)? - polygon.eval(mid)).norm();
                    if g > best.0 {
                        best = (g, mid);
                    }
                }
            }
            u = best.1;
            if current.knots().knots().iter().any(|k| (k - u).abs() < KNOT_SNAP) {
                break;
            }
        }
        current = match current.insert_knot(u) {
            Ok(c) => c,
            Err(Error::Multiplicity { .. }) => break,
            Err(e) => return Err(e),
        };
        insertions += 1;
        history.push(deviation_metric(&current)?);
    }
    let tolerance_met = *history.last().unwrap() <= eps_tol;
    Ok((current, RefineReport { history, insertions, tolerance_met }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub residual: f64,
    pub deviation: f64,
    pub refinement_steps: usize,
    pub tolerance_met: bool,
}

/// Basis rows of a curve at fixed data parameters, kept so warm-started
/// control points can be evaluated at the data sites without span searches.
#[derive(Clone, Debug)]
pub(crate) struct Collocation {
    order: usize,
    first: Vec<usize>,
    weights: Vec<f64>,
}

impl Collocation {
    fn new(curve: &BSplineCurve, params: &[f64]) -> Result<Self> {
        let p = curve.degree();
        let order = p + 1;
        let mut first = Vec::with_capacity(params.len());
        let mut weights = vec![0.0; params.len() * order];
        for (i, &u) in params.iter().enumerate() {
            let span = curve.knots().span(u)?;
            curve.knots().basis_functions(span, u, &mut weights[i * order..(i + 1) * order]);
            first.push(span - p);
        }
        Ok(Self { order, first, weights })
    }

    pub(crate) fn rows(&self) -> usize {
        self.first.len()
    }

    /// First control index and basis weights of data row `i`.
    pub(crate) fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.first[i], &self.weights[i * self.order..(i + 1) * self.order])
    }

    pub(crate) fn eval(&self, i: usize, control: &[Vec2]) -> Vec2 {
        let (first, w) = self.row(i);
        w.iter().zip(&control[first..]).fold(Vec2::zeros(), |acc, (w, p)| acc + p * *w)
    }
}

/// A stencil with its fitted local curve and the parameters of its points.
#[derive(Clone, Debug)]
pub struct Stencil {
    indices: StencilIndices,
    curve: BSplineCurve,
    params: Vec<f64>,
    colloc: Collocation,
}

impl Stencil {
    /// Fits the stencil's points from `cloud`, then refines the control
    /// polygon when `refine = Some((eps_tol, max_insertions))`.
    pub fn fit(
        indices: StencilIndices,
        cloud: &[Vec2],
        degree: usize,
        refine: Option<(f64, usize)>,
    ) -> Result<(Self, FitReport)> {
        let points: Vec<Vec2> = indices.indices().map(|i| cloud[i]).collect();
        let params = chord_parameterize(&points)?.values;
        let curve = interpolate_at(&points, &params, degree)?;
        let (curve, refinement_steps, deviation, tolerance_met) = match refine {
            Some((eps_tol, max_insertions)) => {
                let (c, report) = refine_control_polygon(&curve, eps_tol, max_insertions)?;
                let dev = report.deviation();
                (c, report.insertions, dev, report.tolerance_met)
            }
            None => {
                let dev = deviation_metric(&curve)?;
                (curve, 0, dev, true)
            }
        };
        let stencil = Self::from_parts(indices, curve, params)?;
        let residual = stencil.interpolation_error(cloud);
        Ok((stencil, FitReport { residual, deviation, refinement_steps, tolerance_met }))
    }

    pub fn from_parts(indices: StencilIndices, curve: BSplineCurve, params: Vec<f64>) -> Result<Self> {
        if params.len() != indices.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} parameters for a stencil of {} points",
                params.len(),
                indices.len()
            )));
        }
        let colloc = Collocation::new(&curve, &params)?;
        Ok(Self { indices, curve, params, colloc })
    }

    pub fn indices(&self) -> &StencilIndices {
        &self.indices
    }

    pub fn curve(&self) -> &BSplineCurve {
        &self.curve
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn collocation(&self) -> &Collocation {
        &self.colloc
    }

    /// Replaces the control points, keeping knots and parameters.
    pub fn set_control_points(&mut self, points: Vec<Vec2>) -> Result<()> {
        self.curve = BSplineCurve::new(self.curve.knots().clone(), points)?;
        Ok(())
    }

    pub(crate) fn control_points_mut(&mut self) -> &mut [Vec2] {
        self.curve.control_points_mut()
    }

    /// Curve point at the parameter of local stencil point `local`.
    pub fn curve_at_local(&self, local: usize) -> Vec2 {
        self.colloc.eval(local, self.curve.control_points())
    }

    /// `max_i |q_i - f(u_i)|` over all stencil points.
    pub fn interpolation_error(&self, cloud: &[Vec2]) -> f64 {
        self.indices
            .indices()
            .enumerate()
            .map(|(l, i)| (cloud[i] - self.curve_at_local(l)).norm())
            .fold(0.0, f64::max)
    }
}

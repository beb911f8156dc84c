//! Reaction-diffusion on a moving closed curve.
//!
//! The Laplace-Beltrami operator is the non-uniform three-point second
//! difference in arc length with periodic wraparound. Each IMEX step treats
//! diffusion implicitly and the Schnakenberg kinetics and dilution term
//! explicitly, so both fields need one cyclic tridiagonal solve.

use crate::curve::Vec2;
use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RDParams {
    pub d_u: f64,
    pub d_v: f64,
    pub gamma: f64,
    pub react_c: f64,
    pub react_d: f64,
    pub sigma: f64,
    pub theta0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for RDParams {
    fn default() -> Self {
        Self {
            d_u: 0.1,
            d_v: 1.5,
            gamma: 100.0,
            react_c: 0.1,
            react_d: 0.9,
            sigma: 0.3,
            theta0: 0.0,
            c1: 0.02,
            c2: 1.0,
        }
    }
}

impl RDParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("D_u", self.d_u), ("D_v", self.d_v), ("gamma", self.gamma), ("sigma", self.sigma)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfiguration(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Homogeneous steady state `(c + d, d / (c + d)^2)`.
    pub fn steady_state(&self) -> Result<(f64, f64)> {
        let s = self.react_c + self.react_d;
        if s == 0.0 {
            return Err(Error::DegenerateParameters);
        }
        Ok((s, self.react_d / (s * s)))
    }

    /// Schnakenberg kinetics `(g1, g2)`.
    pub fn reaction_terms(&self, u: f64, v: f64) -> (f64, f64) {
        let u2v = u * u * v;
        (self.gamma * (self.react_c - u + u2v), self.gamma * (self.react_d - u2v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Cumulative arc position of each node, starting at 0.
    pub arc_positions: Vec<f64>,
}

impl FieldState {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Arc positions of the nodes of a closed polygon and its total length.
pub fn arc_positions(points: &[Vec2]) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        s.push(acc);
        acc += (points[(i + 1) % n] - points[i]).norm();
    }
    (s, acc)
}

/// Backward and forward node spacings `(h_-, h_+)` on a periodic mesh.
fn spacings(arc: &[f64], total: f64) -> Result<Vec<(f64, f64)>> {
    let n = arc.len();
    let gap = |i: usize| -> f64 {
        if i + 1 < n {
            arc[i + 1] - arc[i]
        } else {
            arc[0] + total - arc[n - 1]
        }
    };
    (0..n)
        .map(|i| {
            let (hm, hp) = (gap((i + n - 1) % n), gap(i));
            if hm <= 0.0 || hp <= 0.0 {
                Err(Error::DegenerateMesh(i))
            } else {
                Ok((hm, hp))
            }
        })
        .collect()
}

/// Periodic second derivative in arc length.
pub fn laplace_beltrami(values: &[f64], arc: &[f64], total: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 || arc.len() != n {
        return Err(Error::InvalidConfiguration(format!(
            "laplacian needs >= 3 nodes with matching arc positions, got {n} / {}",
            arc.len()
        )));
    }
    let h = spacings(arc, total)?;
    Ok((0..n)
        .map(|i| {
            let (hm, hp) = h[i];
            let (wm, w, wp) = (values[(i + n - 1) % n], values[i], values[(i + 1) % n]);
            2.0 / (hm + hp) * ((wp - w) / hp - (w - wm) / hm)
        })
        .collect())
}

/// Trapezoidal integral of a periodic nodal field over the closed curve.
pub fn integral(values: &[f64], arc: &[f64], total: f64) -> Result<f64> {
    let h = spacings(arc, total)?;
    Ok(values.iter().zip(h).map(|(w, (hm, hp))| w * 0.5 * (hm + hp)).sum())
}

/// Steady state plus a Gaussian bump centered at angle `theta0`, with nodal
/// angles `2π s / L`.
pub fn gaussian_ic(params: &RDParams, arc: &[f64], total: f64) -> Result<FieldState> {
    let (u0, v0) = params.steady_state()?;
    let bump: Vec<f64> = arc
        .iter()
        .map(|&s| {
            let theta = 2.0 * PI * s / total;
            let d = wrap_angle(theta - params.theta0);
            0.5 * (-(d * d) / (2.0 * params.sigma * params.sigma)).exp()
        })
        .collect();
    Ok(FieldState {
        u: bump.iter().map(|b| u0 * (1.0 + b)).collect(),
        v: bump.iter().map(|b| v0 * (1.0 + b)).collect(),
        arc_positions: arc.to_vec(),
    })
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Solves a cyclic tridiagonal system. `lower[i]` couples row `i` to
/// `i - 1` and `upper[i]` to `i + 1`, both with periodic wraparound.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::InvalidConfiguration("cyclic system needs at least 3 unknowns".into()));
    }
    // Sherman-Morrison: A = T + w z^T with the corner entries moved into w z^T
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    let x = thomas(lower, &d, upper, rhs)?;
    let mut w = vec![0.0; n];
    w[0] = gamma;
    w[n - 1] = alpha;
    let z = thomas(lower, &d, upper, &w)?;

    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    let out: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::TimeStepTooLarge)
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet.abs() < 1e-300 {
        return Err(Error::TimeStepTooLarge);
    }
    x[0] = rhs[0] / bet;
    for i in 1..n {
        c[i] = upper[i - 1] / bet;
        bet = diag[i] - lower[i] * c[i];
        if bet.abs() < 1e-300 {
            return Err(Error::TimeStepTooLarge);
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / bet;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// One IMEX Euler step on the current curve geometry. `signed_curvature`
/// and `normal_speed` are per node; their product is the dilution rate.
pub fn imex_step(
    state: &FieldState,
    total_length: f64,
    signed_curvature: &[f64],
    normal_speed: &[f64],
    params: &RDParams,
    dt: f64,
) -> Result<FieldState> {
    let n = state.len();
    if !(dt > 0.0) {
        return Err(Error::InvalidConfiguration("time step must be positive".into()));
    }
    if n < 3 || state.v.len() != n || signed_curvature.len() != n || normal_speed.len() != n {
        return Err(Error::InvalidConfiguration("field and geometry sizes differ".into()));
    }
    let h = spacings(&state.arc_positions, total_length)?;
    let mut rhs_u = Vec::with_capacity(n);
    let mut rhs_v = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = (state.u[i], state.v[i]);
        let (g1, g2) = params.reaction_terms(u, v);
        let div = signed_curvature[i] * normal_speed[i];
        rhs_u.push(u + dt * (g1 - u * div));
        rhs_v.push(v + dt * (g2 - v * div));
    }
    let solve = |coef: f64, rhs: &[f64]| -> Result<Vec<f64>> {
        let mut lower = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for &(hm, hp) in &h {
            let s = 2.0 * dt * coef / (hm + hp);
            lower.push(-s / hm);
            upper.push(-s / hp);
            diag.push(1.0 + s / hm + s / hp);
        }
        solve_cyclic_tridiagonal(&lower, &diag, &upper, rhs)
    };
    let out = FieldState {
        u: solve(params.d_u, &rhs_u)?,
        v: solve(params.d_v, &rhs_v)?,
        arc_positions: state.arc_positions.clone(),
    };
    if !out.is_finite() {
        return Err(Error::TimeStepTooLarge);
    }
    Ok(out)
}

/// Periodic linear interpolation of nodal values at arc position `s`.
pub fn sample_periodic(values: &[f64], arc: &[f64], total: f64, s: f64) -> f64 {
    let n = values.len();
    let s = s.rem_euclid(total);
    let i = arc.partition_point(|&a| a <= s).saturating_sub(1);
    let (s0, s1) = (arc[i], if i + 1 < n { arc[i + 1] } else { total + arc[0] });
    let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
    values[i] * (1.0 - t) + values[(i + 1) % n] * t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, total: f64) -> Vec<f64> {
        (0..n).map(|i| total * i as f64 / n as f64).collect()
    }

    fn params(c: f64, d: f64, gamma: f64) -> RDParams {
        RDParams { react_c: c, react_d: d, gamma, ..RDParams::default() }
    }

    #[test]
    fn steady_state_examples() {
        let p = params(0.1, 0.9, 1.0);
        let (u0, v0) = p.steady_state().unwrap();
        assert!((u0 - 1.0).abs() < 1e-15 && (v0 - 0.9).abs() < 1e-15);
        let (g1, g2) = p.reaction_terms(u0, v0);
        assert!(g1.abs() < 1e-14 && g2.abs() < 1e-14);
        assert_eq!(params(1.0, 0.0, 1.0).steady_state().unwrap(), (1.0, 0.0));
        assert_eq!(params(0.5, -0.5, 1.0).steady_state(), Err(Error::DegenerateParameters));
    }

    #[test]
    fn reaction_examples() {
        let p = params(0.3, 0.7, 2.0);
        assert_eq!(p.reaction_terms(0.0, 0.0), (0.6, 1.4));
        assert_eq!(params(0.0, 0.0, 1.0).reaction_terms(1.0, 1.0), (0.0, -1.0));
    }

    #[test]
    fn laplacian_of_constant_and_eigenfunction() {
        let total = 2.0 * PI;
        let arc = uniform(50, total);
        let lap = laplace_beltrami(&[3.0; 50], &arc, total).unwrap();
        assert!(lap.iter().all(|x| x.abs() < 1e-12));

        let err = |n: usize| {
            let arc = uniform(n, total);
            let k = 2.0 * PI / total;
            let f: Vec<f64> = arc.iter().map(|s| (k * s).cos()).collect();
            let lap = laplace_beltrami(&f, &arc, total).unwrap();
            arc.iter()
                .zip(lap)
                .map(|(s, l)| (l + k * k * (k * s).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(100) / err(200);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn laplacian_rejects_coincident_nodes() {
        let arc = vec![0.0, 1.0, 1.0, 2.0];
        assert!(matches!(laplace_beltrami(&[0.0; 4], &arc, 3.0), Err(Error::DegenerateMesh(_))));
    }

    #[test]
    fn gaussian_examples() {
        let total = 2.0 * PI;
        let arc = uniform(64, total);
        let mut p = params(0.1, 0.9, 1.0);
        p.theta0 = arc[10];
        let st = gaussian_ic(&p, &arc, total).unwrap();
        assert!((st.u[10] - 1.5).abs() < 1e-14);
        p.sigma = 1e3;
        let wide = gaussian_ic(&p, &arc, total).unwrap();
        assert!(wide.u.iter().all(|u| (u - 1.5).abs() < 1e-3));
        p.sigma = 0.05;
        let narrow = gaussian_ic(&p, &arc, total).unwrap();
        assert!((narrow.u[42] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            let ax = lower[i] * x[(i + n - 1) % n] + diag[i] * x[i] + upper[i] * x[(i + 1) % n];
            assert!((ax - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let total = 2.0 * PI;
        let arc = uniform(40, total);
        let p = params(0.1, 0.9, 100.0);
        let (u0, v0) = p.steady_state().unwrap();
        let st = FieldState { u: vec![u0; 40], v: vec![v0; 40], arc_positions: arc };
        let next = imex_step(&st, total, &[1.0; 40], &[0.0; 40], &p, 1e-3).unwrap();
        for i in 0..40 {
            assert!((next.u[i] - u0).abs() < 1e-12 && (next.v[i] - v0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let total = 2.0 * PI;
        let arc: Vec<f64> = (0..60).map(|i| total * (i as f64 + 0.3 * (i as f64).sin()) / 60.0).collect();
        let mut p = params(0.0, 0.0, 1.0);
        p.gamma = 0.0;
        let u: Vec<f64> = arc.iter().map(|s| 1.0 + (3.0 * s).sin()).collect();
        let st = FieldState { v: u.clone(), u, arc_positions: arc.clone() };
        let before = integral(&st.u, &arc, total).unwrap();
        let next = imex_step(&st, total, &[1.0; 60], &[0.0; 60], &p, 1e-2).unwrap();
        let after = integral(&next.u, &arc, total).unwrap();
        assert!((after - before).abs() <= 1e-10 * before.abs());
    }

    #[test]
    fn dilution_on_shrinking_circle() {
        let total = 2.0 * PI;
        let n = 30;
        let arc = uniform(n, total);
        let p = params(0.1, 0.9, 100.0);
        let (u0, v0) = p.steady_state().unwrap();
        let st = FieldState { u: vec![u0; n], v: vec![v0; n], arc_positions: arc };
        for dt in [1e-3, 5e-4] {
            let next = imex_step(&st, total, &vec![1.0; n], &vec![-1.0; n], &p, dt).unwrap();
            // du/dt = u κ² with κ = 1, exact u0 e^{dt}
            let exact = u0 * f64::exp(dt);
            assert!((next.u[0] - exact).abs() <= dt * dt);
        }
    }

    #[test]
    fn periodic_sampling_reproduces_nodes() {
        let total = 2.0;
        let arc = uniform(8, total);
        let vals: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(sample_periodic(&vals, &arc, total, arc[3]), 3.0);
        assert!((sample_periodic(&vals, &arc, total, total - 0.125) - 3.5).abs() < 1e-12);
    }
}

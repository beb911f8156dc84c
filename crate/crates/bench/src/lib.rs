//! Fixtures shared by the benchmarks in `benches/`.

use curvefront::study::{generate, Shape};
use curvefront::{EvolutionConfig, PointCloud, Simulation};

pub fn circle(n: usize) -> PointCloud {
    generate(&Shape::Circle { r0: 1.0 }, n).expect("circle")
}

/// Curvature flow on the unit circle without resampling, already past its
/// first step so that only warm-started updates remain.
pub fn warm_simulation(n: usize, dt: f64) -> Simulation {
    let pc = circle(n);
    let mut cfg = EvolutionConfig::for_cloud(&pc, dt, 1e6 * dt);
    cfg.resample = None;
    let mut sim = Simulation::new(pc, cfg).expect("simulation");
    sim.step().expect("first step");
    sim
}

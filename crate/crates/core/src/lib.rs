//! Lagrangian evolution of closed planar curves represented by point
//! clouds and local B-spline fits, with an optional reaction-diffusion
//! system carried on the moving curve.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cover;
pub mod curve;
pub mod diffgeo;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod pde;
pub mod resample;
pub mod study;

pub use cover::{partition, PointCloud, StencilIndices};
pub use curve::{BSplineCurve, KnotVector, Vec2};
pub use diffgeo::GeometrySample;
pub use error::{Error, Result};
pub use evolve::{run, EvolutionConfig, FrameRecord, ResampleConfig, Simulation, StepFlags, VelocityField};
pub use fit::Stencil;
pub use pde::{FieldState, RDParams};

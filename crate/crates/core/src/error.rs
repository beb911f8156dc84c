use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("parameter u = {u} lies outside the evaluable range [{lower}, {upper}]")]
    OutOfDomain { u: f64, lower: f64, upper: f64 },

    #[error("derivative order {order} exceeds curve degree {degree}")]
    InvalidOrder { order: usize, degree: usize },

    #[error("curvature needs degree >= 2, got {0}")]
    InvalidDegree(usize),

    #[error("knot {u} already has multiplicity {multiplicity}; degree {degree} allows at most {degree}")]
    Multiplicity { u: f64, multiplicity: usize, degree: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("interpolation failed: {0}")]
    FitFailure(String),

    #[error("tangent vanishes at u = {u}")]
    DegenerateTangent { u: f64 },

    #[error("non-finite value produced at step {step}")]
    NumericalBlowup { step: usize },

    #[error("control point optimization failed: step size fell below {min_alpha}")]
    OptimizationFailure { min_alpha: f64 },

    #[error("degenerate reaction parameters: c + d = 0")]
    DegenerateParameters,

    #[error("degenerate mesh: coincident arc positions at node {0}")]
    DegenerateMesh(usize),

    #[error("cyclic system is singular; time step too large")]
    TimeStepTooLarge,

    #[error("velocity field `{0}` needs a surface field value")]
    MissingField(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::dynamics::ParticleState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("profile has no computable tail bound: {0}")]
    UnsupportedProfile(String),

    /// The adaptive step fell below the step floor before consensus.
    #[error("step size {h:.3e} fell below the floor {h_min:.3e} at t = {t}")]
    Stiffness {
        t: f64,
        h: f64,
        h_min: f64,
        state: Box<ParticleState>,
    },

    #[error("state became non-finite at t = {t}")]
    Divergence { t: f64 },

    /// The requested value of the kernel primitive exceeds its limit at infinity.
    #[error("value {value} is not attainable; the kernel primitive is bounded by {limit}")]
    Unattainable { value: f64, limit: f64 },

    #[error("flocking-time bound degenerates: psi(Dx_infty = {dx_infty}) = 0")]
    DegenerateBound { dx_infty: f64 },

    /// The position-diameter bound does not exist because the kernel is
    /// integrable and the initial velocity energy exceeds what it can absorb.
    #[error(
        "conditional flocking hypothesis fails: required primitive value {required} \
         exceeds the kernel limit {limit}"
    )]
    ConditionalHypothesisFailed { required: f64, limit: f64 },
}

//! Finite-time flocking of Cucker-Smale particle systems with sublinear
//! velocity coupling on fixed and switching sender networks.
//!
//! - [`kernels`]: communication weights, the sign-power coupling, sender
//!   profiles and switching signals.
//! - [`dynamics`]: the vector field and an adaptive integrator with
//!   consensus detection.
//! - [`diagnostics`]: diameters, mean velocity, the Lyapunov functional and
//!   trajectory audits.
//! - [`theory`]: a-priori envelopes, alignment times and flocking-time bounds.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod kernels;
pub mod theory;

pub use diagnostics::{frame, DiagnosticsFrame};
pub use dynamics::{integrate, Network, ParticleState, SimParams, Trajectory};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, SenderProfile, SwitchingSignal};
pub use theory::{flocking_time_bound, InitialEnvelope, TheoryBounds};

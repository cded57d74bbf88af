//! Simulation and analytics engine for a one-dimensional Brownian particle
//! among a Poissonian field of Brownian-moving traps: survival probability
//! by direct simulation and by the exact sausage-volume identity, a
//! deterministic confinement lower bound, and conditional-on-survival
//! statistics through exact importance weights.

// Validation guards use negated comparisons (`!(x > 0.0)`) deliberately:
// they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod conditional;
pub mod error;
pub mod paths;
pub mod quad;
pub mod sausage;
pub mod stats;
pub mod survival;
pub mod trapfield;

pub use error::{Error, Result};

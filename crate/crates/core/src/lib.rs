//! Semiclassical and stochastic dynamics of relativistic scalar charges:
//! time-dependent renormalization, the causal scalar Abraham-Lorentz-Dirac
//! equation, linearized Langevin fluctuations driven by vacuum noise, and
//! retarded multiparticle interactions.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod kernels;
pub mod multiparticle;
pub mod numerics;
pub mod par;
pub mod scenario;
pub mod semiclassical;
pub mod stochastic;
pub mod worldline;

pub use error::{Error, Result};

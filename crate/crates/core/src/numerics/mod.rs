//! Special functions, quadrature, root finding and PSD factorization.

mod gamma;
mod psd;
mod quad;
mod root;

pub use gamma::{gamma, gamma_lower, gamma_upper, regularized_lower};
pub use psd::{psd_factor, psd_factor_with_floor, psd_project, SpectralFactor, DEFAULT_CLIP_TOL};
pub use quad::{integrate, integrate_vec, QuadratureSpec};
pub use root::bracketed_root;

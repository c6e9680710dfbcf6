//! Radiation-pressure induced EPR correlations between two cavity modes
//! sharing one movable mirror.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: laboratory and reduced parameters, the radiation-pressure
//!   steady state (including the bistability cubic) and coupling constants.
//! - [`criterion`]: closed-form inference variances, the product criterion
//!   and scans over the reduced (power, temperature) plane.
//! - [`spectra`]: frequency-domain solution of the linearized Langevin
//!   equations and the output quadrature spectral matrices.
//! - [`sde_oracle`]: Euler–Maruyama simulation of the same linear system with
//!   finite-time windowed estimators, used to cross-check [`spectra`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod criterion;
pub mod error;
pub mod model;
pub mod sde_oracle;
pub mod spectra;

pub use error::{Error, Result};

//! Thermoelastic rod with internal delay and Kelvin-Voigt damping:
//! stability constants, staggered-grid discretization, IMEX time stepping,
//! energy and Lyapunov monitoring, and spectra of the semi-discrete generator.

// `!(x > 0.0)` is used on purpose so that NaN falls on the rejecting side,
// and the numerical kernels index several arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod constants;
pub mod delay;
pub mod discretization;
pub mod error;
pub mod integrate;
pub mod observables;
pub mod params;
pub mod spectral;

pub use error::{Error, Result};
pub use params::{PhysParams, ThetaBc};

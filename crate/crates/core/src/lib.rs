//! Linear boundary-value problems for r-th order ODE systems with generic
//! boundary operators.

pub mod approx;
pub mod boundary;
pub mod bvpsolve;
pub mod cli;
pub mod error;
pub mod funcspace;
pub mod odecore;
pub mod paramlab;
pub mod serde_util;

pub use error::{BvpError, Result};

/// Complex scalar used for all function values and boundary data.
pub type C64 = num_complex::Complex64;

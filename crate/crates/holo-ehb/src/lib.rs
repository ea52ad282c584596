//! Electromagnetic hybrid beamforming for 3D holographic antenna arrays.
//!
//! The crate covers the full chain from array geometry to multi-user
//! precoding: spherical-wave coupling estimation, superdirective current
//! synthesis, a geometric stochastic channel, a small primal-dual conic
//! solver and the alternating SDR optimizer built on top of it.

pub mod array_model;
pub mod channel;
pub mod conic;
pub mod ehb;
mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod radiation;
pub mod special_functions;
pub mod swe_coupling;

pub use error::{EhbError, Result};

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

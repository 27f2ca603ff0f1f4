//! Direct multiobject tracking on raw multi-tone, multi-snapshot array data.
//!
//! The crate is `no_std` + `alloc`. Objects are represented as potential
//! objects (POs) with a Bernoulli existence variable, a kinematic state and
//! per-tone transmit powers; their signal enters the data through a
//! Bernoulli-Gaussian covariance model and is inferred with a particle-based
//! sum-product scheme. A grid matching-pursuit detector, a conventional
//! detect-then-track baseline and the GOSPA metric are included for
//! benchmarking.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assignment;
pub mod baseline;
pub mod direct;
pub mod dynamics;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod mp;
pub mod resample;
pub mod scenario;
pub mod state;
pub mod steering;
pub mod track;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::KinematicState;

//! Beam-position estimation for photon-counting detector arrays.

pub mod analytic;
pub mod calibration;
pub mod crlb;
pub mod detection;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod harness;
pub mod ga;
pub mod model;
pub mod poisson;
pub mod rng;
pub mod sim;
pub mod special;

pub use error::{Error, Result};

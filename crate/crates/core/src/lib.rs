//! Simulation of an inhomogeneously broadened spin ensemble coupled to a
//! microwave cavity, with and without a continuous dressing drive.
//!
//! Frequencies are angular and measured in units of the broadening width Δ;
//! times are in units of 1/Δ.

mod error;
pub mod config;
pub mod dynamics;
pub mod field_profile;
pub mod memory;
pub mod parallel;
pub mod quad;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};

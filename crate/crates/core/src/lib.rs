//! Dressed-basis numerics for the Jaynes-Cummings model.
//!
//! The single-site ladder is diagonalized in closed form (`model`), re-expressed as
//! an infinite series of normally ordered k-body interactions (`kbody`), and checked
//! against brute-force matrices (`oracle`). `jch2` couples two sites by photon
//! hopping and `sweep` maps ground-state diagnostics over parameter grids.

pub mod config;
pub mod error;
pub mod jch2;
pub mod kbody;
pub mod model;
pub mod oracle;
pub mod precision;
pub mod sweep;

pub use error::{Error, Result};
pub use kbody::{Coefficient, CoefficientTable, EffectiveOnSite};
pub use model::{Branch, DetuningApproach, DressedLabel, OperatorLabel, SystemParams};

//! Resilient formation control for networked double-integrator agents.
//!
//! - [`graph`], [`linalg`]: link model, weighted graphs, Laplacians, spectra.
//! - [`robustness`]: exact r-robustness and spectral certificates.
//! - [`spectral`]: distributed node counting, `lambda2` and Fiedler estimates.
//! - [`consensus`], [`adversary`]: W-MSR and misbehaving agents.
//! - [`control`], [`dynamics`]: connectivity gradient control and agent motion.
//! - [`sim`]: scenarios, presets and run artifacts.

pub mod adversary;
pub mod consensus;
pub mod control;
pub mod dynamics;
pub mod edgelist;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod robustness;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};

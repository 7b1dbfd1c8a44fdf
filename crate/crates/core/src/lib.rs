//! Contact-rich plate insertion in a planar simulator.

pub mod baselines;
pub mod config;
pub mod env;
pub mod eval;
pub mod nn;
pub mod policy;
pub mod sac;
pub mod se2;
pub mod sim;

/// Crate version and source revision, recorded in every log and report.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SLOTBENCH_GIT_HASH"));

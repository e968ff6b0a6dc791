//! Simulation laboratory for online network revenue management.
//!
//! Queries arrive one per period, each carrying a reward and a resource
//! consumption vector drawn i.i.d. from a known distribution. An online
//! policy must irrevocably accept or reject each query subject to finite
//! resource capacities. This crate provides
//!
//! - the instance model and reproducible sample paths ([`model`]),
//! - exact solvers for the fluid and semi-fluid programs and their duals ([`solvers`]),
//! - the per-path hindsight LP benchmark ([`offline`]),
//! - the online accept/reject policies ([`policies`]),
//! - Monte-Carlo experiments for regret growth and dual convergence ([`harness`]).

pub mod error;
pub mod harness;
pub mod model;
pub mod offline;
pub mod policies;
pub mod solvers;

pub use error::{Error, Result};

/// Crate version, recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

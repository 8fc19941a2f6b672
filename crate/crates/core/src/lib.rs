//! Peer-to-peer energy sharing: equilibrium computation, multi-parametric LP
//! analysis by adaptive vertex generation, and per-user flexibility requirements.
//!
//! The crate is organised bottom-up:
//!
//! - [`solver`]: dense simplex LP and active-set QP solvers.
//! - [`polytope`]: halfspace polyhedra, redundancy removal, vertex enumeration.
//! - [`market`]: instance model, PTDFs, central problem, equilibrium recovery,
//!   best-response simulation.
//! - [`mplp`]: convex-combination linearisation and the parametric LP form.
//! - [`avg`]: adaptive vertex generation of the value function.
//! - [`flexibility`]: per-region policies and flexibility intervals.
//! - [`fixtures`]: bundled instances.

pub mod avg;
pub mod error;
pub mod fixtures;
pub mod flexibility;
pub mod market;
pub mod mplp;
pub mod polytope;
pub mod solver;

pub use error::{Error, Result};

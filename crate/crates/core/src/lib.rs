//! Flow-equation renormalization of scalar φ⁴ theory on the half-space ℝ⁺×ℝ³.
//!
//! The crate provides boundary heat kernels, regularized flowing propagators,
//! the surface tree and forest calculus with its weight factors, inequality
//! sweeps for the weight-factor lemmas, and one-loop integrations of the bulk
//! and surface flow equations.

pub mod error;
pub mod flow;
pub mod forests;
pub mod kernels;
pub mod propagators;
pub mod quad;
pub mod rng;
pub mod special;
pub mod weights;

pub use error::{Error, Result};
pub use kernels::{BoundaryKind, KernelContext, KernelQuery};
pub use propagators::{CutoffPair, Part, PropagatorQuery};

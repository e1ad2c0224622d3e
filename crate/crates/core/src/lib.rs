//! Certifiably optimal pose-graph synchronization over SE(2) and SE(3).
//!
//! Given noisy pairwise relative-pose measurements on a connected graph, this
//! crate computes a globally optimal estimate of the absolute poses by solving
//! a low-rank Riemannian realization of a semidefinite relaxation of the
//! maximum-likelihood problem, and produces a machine-checkable optimality
//! certificate for the recovered estimate.
//!
//! The pipeline (see [`solution::se_sync`]):
//!
//! 1. build cached sparse data matrices from the measurement graph,
//! 2. minimize `tr(Q Yᵀ Y)` over a product of Stiefel manifolds with a
//!    truncated-Newton trust-region method, climbing ranks until a
//!    rank-deficient second-order critical point is found,
//! 3. round the low-rank factor to a feasible rotation estimate, recover
//!    translations in closed form, and
//! 4. verify global optimality by checking positive semidefiniteness of the
//!    certificate operator `C = Q − Λ`.
//!
//! Supporting components: a g2o-format parser/writer ([`g2o`]), a synthetic
//! cube-world dataset generator ([`synthetic`]), samplers for the isotropic
//! Langevin distribution on SO(d) ([`langevin`]), and gauge-invariant
//! evaluation metrics ([`metrics`]).
//!
//! The hot kernels are data-parallel over matrix columns and use rayon when
//! the `parallel` feature (enabled by default) is active; disabling it yields
//! a fully sequential build with identical results.

pub mod cycles;
pub mod data;
pub mod error;
pub mod g2o;
pub mod graph;
pub mod langevin;
pub mod metrics;
pub mod pose;
pub mod rtr;
pub mod solution;
pub mod sparse;
pub mod staircase;
pub mod stiefel;
pub mod synthetic;

pub(crate) mod exec;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::Error;
pub use graph::{MeasurementGraph, RelativePoseMeasurement};
pub use pose::Pose;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! Gibbs measures of the multi-state hard core model on rooted `b`-ary trees.
//!
//! A configuration assigns every vertex a spin in `0..=C` such that the spins
//! on the two ends of any edge sum to at most `C`, and it is weighted by
//! `λ^(sum of spins)`. The crate computes root marginals on finite trees, the
//! infinite-tree level recursion and its fixed points, critical activities and
//! the order of the phase transition. Two stochastic engines (a monotone
//! heat-bath sampler and a loss-network simulator) cross-check the exact
//! routes.
//!
//! Module map:
//!
//! - [`model`]: parameters, tree shapes, boundary conditions, configurations.
//! - [`exact`]: bottom-up partition functions, root laws, brute-force oracle.
//! - [`recursion`]: the level recursion on root laws and the `C = 2` scalar
//!   two-step recursion, trajectories and bounding envelopes.
//! - [`maps`]: the one-dimensional S-shaped maps and their fixed points.
//! - [`criticality`]: coexistence detection, critical activity search, order
//!   classification and large-`b` window checks.
//! - [`dynamics`]: the coupled heat-bath sampler and the loss network.

pub mod criticality;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod logspace;
pub mod maps;
pub mod model;
pub mod recursion;

pub use error::{Error, Result};
pub use exact::{PartitionVector, RootLaw};
pub use model::{BoundaryCondition, ModelParams, Spin, TreeConfig, TreeShape};

//! Safe stochastic linear bandits.
//!
//! A learner repeatedly picks an action `x` from a star-convex set, observes a
//! noisy reward `θᵀx + ε` and a noisy constraint output `Ax + η`, and must keep
//! `Ax` inside a known target set in every round even though `A` is unknown.
//!
//! Modules:
//! - [`estimation`]: online regularized least squares and confidence radii.
//! - [`geometry`]: action sets, direction grids and exact ray scalings against
//!   half-space, ball and box targets.
//! - [`policies`]: the constraint-respecting decision rules.
//! - [`environment`]: ground-truth instances, noisy feedback and the regret oracle.
//! - [`harness`]: seeded trial runner, invariant checks, aggregation and export.

pub mod environment;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod policies;
pub mod rng;

pub use error::{Error, Result};

//! Prediction rewards as tangent lower bounds on negative belief entropy,
//! exact discrete belief filtering, and deep anticipatory network (DAN)
//! training on two desk-scale environments: camera selection for tracking
//! a walker on a grid, and discrete glimpse attention over small images.
//!
//! The crate is organised around three layers:
//!
//! * [`simplex`] and [`bounds`] — the convex-duality core: entropy,
//!   log-sum-exp, tangent families induced by prediction rewards, and
//!   numerical verification of the worst-case gap bound.
//! * [`belief`], [`tracking`], [`attention`] — model-based reference
//!   machinery (exact Bayes filters, particle filter) and the two
//!   synthetic environments with their factored models.
//! * [`nn`] and [`dan`] — a small reverse-mode neural stack (dense,
//!   ReLU, tanh recurrence, dropout, Adam) and the DAN training loop
//!   with replay, double-DQN targets and paired Q/M target networks.
//!
//! Everything stochastic takes an explicit seeded generator; see [`rng`]
//! for the stream-splitting scheme.

pub mod attention;
pub mod belief;
pub mod bounds;
pub mod dan;
pub mod error;
pub mod idx;
pub mod nn;
pub mod rng;
pub mod simplex;
pub mod tracking;

pub use error::CoreError;
pub type Result<T> = std::result::Result<T, CoreError>;

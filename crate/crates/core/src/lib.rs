//! Time-splitting laboratory for degenerate parabolic-hyperbolic conservation
//! laws driven by multiplicative noise on the periodic torus.
//!
//! The deterministic semigroup `S` ([`det_solver`]) and the pointwise
//! stochastic flow `R` ([`sde_solver`]) are composed over an adaptive
//! partition ([`splitting`]); [`kinetic`] measures the resulting kinetic
//! objects and [`harness`] drives convergence studies.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod det_solver;
pub mod grid;
pub mod harness;
pub mod kinetic;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sde_solver;
pub mod splitting;

pub use grid::{Field, TorusGrid};
pub use model::ProblemSpec;

//! Vehicle–track–bridge interaction on curved bridges.
//!
//! A rigid-body vehicle rides along a spatial path fixed to a flexible bridge
//! deck. The deck is discretised either with isogeometric (NURBS) Timoshenko
//! elements or with straight Euler–Bernoulli frame elements, and the two
//! subsystems are tied together by wheel–rail constraints solved with
//! Lagrange multipliers.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod coupling;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod path;
pub mod splines;
pub mod vehicle;

pub use error::{Error, Result};
pub use splines::{KnotVector, NurbsCurve};

//! Equilibria, oscillation criteria and simulation for bounded
//! linear-threshold rate networks `tau x' = -x + [W x + u]_0^m`.
// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod regions;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{EIPairNetwork, EIPairParams, Network, NodeSign, SingleInhibitoryNetwork};

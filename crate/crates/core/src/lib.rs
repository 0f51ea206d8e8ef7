//! Time-based hardware cost models for hybrid quantum-classical neural
//! networks, and a multi-objective architecture search that uses them.

// Negated float comparisons deliberately treat NaN as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod ccost;
pub mod circuits;
pub mod error;
pub mod hybrid;
pub mod nas;
pub mod qcost;
pub mod report;
pub mod simkernel;
pub mod transpiler;

pub use error::{Error, Result};

//! Numerical laboratory for the N-membrane obstacle problem.
//!
//! The crate solves the ordered-membrane variational problem on uniform
//! lattices, evaluates the closed-form homogeneous and approximate
//! solutions, extracts and classifies free-boundary points, and evaluates
//! the Weiss and Monneau energies. The `lab` module wires these pieces into
//! reproducible experiments driven by the `membrane-lab` binary.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod energy;
pub mod error;
pub mod freeboundary;
pub mod grid;
pub mod harmonic;
pub mod lab;
pub mod profiles;
pub mod report;
pub mod solver;
pub mod thresholds;

pub use error::{LabError, Result};

//! Sparse linear regression with Bernstein-function penalties.
//!
//! The penalty family `Phi_rho` interpolates between the log penalty
//! (`rho = 0`), the exponential penalty (`rho = 1`) and the lasso (small
//! `alpha`). Estimates come from coordinate descent over an `(eta, alpha)`
//! grid or from the conjugate-maximization (CM) algorithm with adaptive
//! weights.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so NaN fails
// domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdpath;
pub mod cli;
pub mod cm;
pub mod data;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod penalty;
pub mod threshold;

pub use cdpath::{cd_fit, cd_path, CdFit, CdOptions, PathGrid, PathSolution};
pub use cm::{cm_solve, CmOptions, CmState};
pub use data::Dataset;
pub use error::{Error, Result};
pub use penalty::PenaltySpec;
pub use threshold::{threshold, ThresholdDecision};

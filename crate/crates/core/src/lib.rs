//! Adaptive group-LASSO estimation under the asymmetric L_q loss.
//!
//! The crate fits high-dimensional linear models with grouped covariates by
//! minimizing an asymmetric L_q loss (`q = 2` is expectile regression) plus
//! an adaptively weighted group-LASSO penalty. It also ships a Monte Carlo
//! harness for selection/accuracy studies and a CSV fitting pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod error;
pub mod inference;
pub mod io;
pub mod loss;
pub mod simulate;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};

//! Robust difference-in-differences: bias-set bounds on the ATT, their
//! doubly-robust and multi-period variants, bootstrap union confidence
//! bounds, and simulators with closed-form truths.

pub mod analysis;
pub mod cli;
pub mod dgp;
pub mod error;
pub mod gdid;
pub mod inference;
pub mod multi_period;
pub mod numerics;
pub mod panel;
pub mod po;
pub mod relax;
pub mod selection_bias;

pub use error::{Error, Result};

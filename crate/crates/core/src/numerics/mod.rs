//! Regression primitives: least squares, logistic regression and the
//! standard normal helpers used by the simulation oracles.

mod design;
mod logit;
pub mod normal;
mod ols;

pub use design::DesignMatrix;
pub use logit::{
    fit_logit, logit_gradient, logit_log_likelihood, predict_probability, LogitFit, LogitOptions,
};
pub use ols::{fit_ols, LinearFit};

//! Classical regressors over concatenated feature matrices: closed-form
//! ridge, a sigmoid-output linear model, and bootstrap ensembles.

mod ensemble;
mod logistic;
mod ridge;

pub use ensemble::{ensemble_predict, fit_bootstrap_ridge, Ensemble};
pub use logistic::{LogisticConfig, LogisticModel};
pub use ridge::{select_lambda, RidgeConfig, RidgeModel, DEFAULT_LAMBDA_GRID};

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::Matrix;

/// Anything that maps a feature matrix to one score per row.
pub trait Regressor {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

pub(crate) fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Regressor;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::tape::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { lr: 0.5, epochs: 2000 }
    }
}

/// Single linear unit with a sigmoid output, fit to `[0, 1]` targets by
/// full-batch gradient descent on squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Consecutive loss increases tolerated before giving up.
const DIVERGENCE_PATIENCE: usize = 10;

/// Counts consecutive loss increases.
#[derive(Debug, Default)]
struct DivergenceGuard {
    prev: Option<f64>,
    rising: usize,
}

impl DivergenceGuard {
    /// True once the loss has risen `DIVERGENCE_PATIENCE` times in a row.
    fn observe(&mut self, loss: f64) -> bool {
        self.rising = match self.prev {
            Some(p) if loss > p => self.rising + 1,
            _ => 0,
        };
        self.prev = Some(loss);
        self.rising >= DIVERGENCE_PATIENCE
    }
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel { weights: vec![0.0; dim], bias: 0.0 }
    }

    /// Mean squared error and its gradient `(∂/∂w, ∂/∂b)`.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let p = self.predict(x)?;
        if p.len() != y.len() {
            return Err(Error::ShapeMismatch { op: "logistic loss", lhs: vec![p.len()], rhs: vec![y.len()] });
        }
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (i, (pi, yi)) in p.iter().zip(y).enumerate() {
            let r = pi - yi;
            loss += r * r;
            let dz = 2.0 * r * pi * (1.0 - pi) / n;
            gb += dz;
            for (g, xv) in gw.iter_mut().zip(x.row(i)) {
                *g += dz * xv;
            }
        }
        Ok((loss / n, gw, gb))
    }

    pub fn fit(x: &Matrix, y: &[f64], config: LogisticConfig) -> Result<Self> {
        if x.rows() == 0 || x.rows() != y.len() {
            return Err(Error::ShapeMismatch { op: "logistic fit", lhs: vec![x.rows(), x.cols()], rhs: vec![y.len()] });
        }
        if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("target {v} outside [0,1]")));
        }
        if !(config.lr > 0.0) || !config.lr.is_finite() {
            return Err(Error::Usage(format!("learning rate must be positive, got {}", config.lr)));
        }
        let mut model = Self::zeros(x.cols());
        let mut guard = DivergenceGuard::default();
        for epoch in 0..config.epochs {
            let (loss, gw, gb) = model.loss_and_grad(x, y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            if guard.observe(loss) {
                return Err(Error::Diverged(format!(
                    "loss rose for {DIVERGENCE_PATIENCE} consecutive epochs (epoch {epoch}, loss {loss:.6e}, lr {})",
                    config.lr
                )));
            }
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= config.lr * g;
            }
            model.bias -= config.lr * gb;
        }
        Ok(model)
    }
}

impl Regressor for LogisticModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::ShapeMismatch { op: "logistic predict", lhs: vec![x.cols()], rhs: vec![self.weights.len()] });
        }
        Ok((0..x.rows())
            .map(|i| sigmoid(self.bias + x.row(i).iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()))
            .collect())
    }
}

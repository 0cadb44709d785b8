use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{clip01, Regressor};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::metrics::pearson;
use crate::nn::{ParamSet, Tensor};

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub lambda: f64,
    /// Center and scale columns and fit an intercept. Without it the model
    /// is the plain `(XᵀX + λI)⁻¹Xᵀy` with no intercept.
    pub standardize: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda: 1.0, standardize: true }
    }
}

/// Linear model `Xw + b` with weights stored on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub means: Vec<f64>,
    /// Zero for constant columns, which get zero weight.
    pub stds: Vec<f64>,
}

fn check_fit_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Usage(format!("cannot fit on a {}x{} matrix", x.rows(), x.cols())));
    }
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch { op: "fit", lhs: vec![x.rows(), x.cols()], rhs: vec![y.len()] });
    }
    if let Some(i) = x.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature at row {}, column {}", i / x.cols(), i % x.cols())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite target".into()));
    }
    Ok(())
}

impl RidgeModel {
    pub fn fit(x: &Matrix, y: &[f64], config: RidgeConfig) -> Result<Self> {
        check_fit_inputs(x, y)?;
        let lambda = config.lambda;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Usage(format!("ridge lambda must be a non-negative number, got {lambda}")));
        }
        let (n, d) = (x.rows(), x.cols());
        if !config.standardize {
            let weights = solve_normal(x, y, lambda)?;
            return Ok(RidgeModel { weights, intercept: 0.0, lambda, means: vec![0.0; d], stds: vec![1.0; d] });
        }

        let nf = n as f64;
        let means: Vec<f64> = (0..d).map(|j| x.column(j).sum::<f64>() / nf).collect();
        let stds: Vec<f64> = (0..d)
            .map(|j| {
                let var = x.column(j).map(|v| (v - means[j]) * (v - means[j])).sum::<f64>() / nf;
                let s = libm::sqrt(var);
                if s > 1e-12 * (1.0 + means[j].abs()) {
                    s
                } else {
                    0.0
                }
            })
            .collect();
        let active: Vec<usize> = (0..d).filter(|&j| stds[j] > 0.0).collect();
        let y_mean = y.iter().sum::<f64>() / nf;
        let mut weights = vec![0.0; d];
        if !active.is_empty() {
            let mut z = Vec::with_capacity(n * active.len());
            for i in 0..n {
                let row = x.row(i);
                z.extend(active.iter().map(|&j| (row[j] - means[j]) / stds[j]));
            }
            let z = Matrix::new(n, active.len(), z)?;
            let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
            let w = solve_normal(&z, &yc, lambda)?;
            for (k, &j) in active.iter().enumerate() {
                weights[j] = w[k] / stds[j];
            }
        }
        let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
        Ok(RidgeModel { weights, intercept, lambda, means, stds })
    }

    /// Weights on the standardized scale, `w_j·σ_j`.
    pub fn standardized_weights(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.stds).map(|(w, s)| w * s).collect()
    }

    /// Unclipped `Xw + b`.
    pub fn predict_raw(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::ShapeMismatch { op: "ridge predict", lhs: vec![x.cols()], rhs: vec![self.weights.len()] });
        }
        Ok((0..x.rows())
            .map(|i| self.intercept + x.row(i).iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
            .collect())
    }

    /// Packs the model into named tensors for the checkpoint format.
    pub fn to_params(&self) -> Result<ParamSet> {
        let mut ps = ParamSet::new();
        ps.add("ridge.weights", Tensor::vector(self.weights.clone()))?;
        ps.add("ridge.scalars", Tensor::vector(vec![self.intercept, self.lambda]))?;
        ps.add("ridge.means", Tensor::vector(self.means.clone()))?;
        ps.add("ridge.stds", Tensor::vector(self.stds.clone()))?;
        Ok(ps)
    }

    pub fn from_params(ps: &ParamSet) -> Result<Self> {
        let get = |name: &str| -> Result<Vec<f64>> {
            let id = ps.find(name).ok_or_else(|| Error::Data(format!("checkpoint lacks {name}")))?;
            Ok(ps.value(id).data().to_vec())
        };
        let weights = get("ridge.weights")?;
        let scalars = get("ridge.scalars")?;
        let means = get("ridge.means")?;
        let stds = get("ridge.stds")?;
        if scalars.len() != 2 || means.len() != weights.len() || stds.len() != weights.len() {
            return Err(Error::Data(String::from("inconsistent ridge tensors in checkpoint")));
        }
        Ok(RidgeModel { weights, intercept: scalars[0], lambda: scalars[1], means, stds })
    }
}

impl Regressor for RidgeModel {
    /// `Xw + b` clipped to `[0, 1]`.
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.predict_raw(x)?.into_iter().map(clip01).collect())
    }
}

/// Solves `(XᵀX + λI)w = Xᵀy` by Cholesky.
fn solve_normal(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut a = x.gram();
    for i in 0..a.rows() {
        a[(i, i)] += lambda;
    }
    let xty = x.transpose().matvec(y)?;
    let chol = Cholesky::factor(&a).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("ridge system with lambda={lambda} is singular: {msg}")),
        other => other,
    })?;
    chol.solve(&xty)
}

/// Fits one model per grid value and keeps the one with the highest trial
/// Pearson (ties go to the earlier value). Also returns every grid score;
/// `None` marks an undefined correlation.
pub fn select_lambda(
    x_train: &Matrix,
    y_train: &[f64],
    x_trial: &Matrix,
    y_trial: &[f64],
    grid: &[f64],
    standardize: bool,
) -> Result<(RidgeModel, Vec<(f64, Option<f64>)>)> {
    if grid.is_empty() {
        return Err(Error::Usage("empty lambda grid".into()));
    }
    let mut best: Option<(RidgeModel, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let model = RidgeModel::fit(x_train, y_train, RidgeConfig { lambda, standardize })?;
        let r = match pearson(&model.predict(x_trial)?, y_trial) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        scores.push((lambda, r));
        let key = r.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().map_or(true, |(_, b)| key > *b) {
            best = Some((model, key));
        }
    }
    let (model, _) = best.expect("grid is non-empty");
    Ok((model, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design() {
        let x = Matrix::identity(2);
        let m = RidgeModel::fit(&x, &[1.0, 2.0], RidgeConfig { lambda: 1.0, standardize: false }).unwrap();
        assert!((m.weights[0] - 0.5).abs() < 1e-15 && (m.weights[1] - 1.0).abs() < 1e-15);
        assert_eq!(m.intercept, 0.0);
    }

    #[test]
    fn zero_lambda_interpolates() {
        let x = Matrix::from_rows(&[[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [1.0, 0.0, 4.0]]).unwrap();
        let y = [0.2, 0.7, 0.4];
        let m = RidgeModel::fit(&x, &y, RidgeConfig { lambda: 0.0, standardize: false }).unwrap();
        for (p, t) in m.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_reports_condition() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match RidgeModel::fit(&x, &[0.1, 0.2], RidgeConfig { lambda: 0.0, standardize: false }) {
            Err(Error::Singular(msg)) => assert!(msg.contains("condition")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn clipping_and_zero_row() {
        let m = RidgeModel { weights: vec![1.0], intercept: 0.3, lambda: 1.0, means: vec![0.0], stds: vec![1.0] };
        let x = Matrix::from_rows(&[[1.0], [0.0], [-2.0]]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), [1.0, 0.3, 0.0]);
        assert!(m.predict(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn constant_columns_get_zero_weight() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let m = RidgeModel::fit(&x, &[0.1, 0.2, 0.3], RidgeConfig { lambda: 0.0, standardize: true }).unwrap();
        assert_eq!(m.weights[1], 0.0);
        assert!((m.weights[0] - 0.1).abs() < 1e-12);
        assert!((m.intercept - 0.0).abs() < 1e-12);
    }

    #[test]
    fn param_round_trip() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]).unwrap();
        let m = RidgeModel::fit(&x, &[0.1, 0.5, 0.3], RidgeConfig::default()).unwrap();
        assert_eq!(RidgeModel::from_params(&m.to_params().unwrap()).unwrap(), m);
    }

    #[test]
    fn lambda_selection_prefers_signal() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [i as f64 / 30.0, ((i * 7) % 11) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 0.2 + 0.5 * r[0]).collect();
        let (m, scores) = select_lambda(&x, &y, &x, &y, &DEFAULT_LAMBDA_GRID, true).unwrap();
        assert_eq!(scores.len(), 5);
        assert_eq!(m.lambda, 0.01);
        assert!(select_lambda(&x, &y, &x, &y, &[], true).is_err());
    }
}

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip01, Regressor, RidgeConfig, RidgeModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Weighted mean of per-member predictions, clipped to `[0, 1]`. Without
/// weights every member counts equally.
pub fn ensemble_predict(member_preds: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let first = member_preds.first().ok_or_else(|| Error::Usage("ensemble has no members".into()))?;
    let n = first.len();
    if let Some(bad) = member_preds.iter().find(|p| p.len() != n) {
        return Err(Error::ShapeMismatch { op: "ensemble", lhs: vec![n], rhs: vec![bad.len()] });
    }
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.len() != member_preds.len() {
                return Err(Error::ShapeMismatch { op: "ensemble weights", lhs: vec![member_preds.len()], rhs: vec![w.len()] });
            }
            if w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
                return Err(Error::Usage("ensemble weights must be non-negative with a positive sum".into()));
            }
            w
        }
        None => {
            uniform = vec![1.0; member_preds.len()];
            &uniform[..]
        }
    };
    let total: f64 = weights.iter().sum();
    Ok((0..n)
        .map(|i| clip01(member_preds.iter().zip(weights).map(|(p, w)| w * p[i]).sum::<f64>() / total))
        .collect())
}

/// A set of member regressors averaged at prediction time.
pub struct Ensemble {
    pub members: Vec<Box<dyn Regressor>>,
    pub weights: Option<Vec<f64>>,
}

impl core::fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Ensemble").field("members", &self.members.len()).field("weights", &self.weights).finish()
    }
}

impl Regressor for Ensemble {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let preds = self.members.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
        ensemble_predict(&preds, self.weights.as_deref())
    }
}

/// `k` ridge models, member `m` fit on a bootstrap resample drawn with
/// seed `seed + m`.
pub fn fit_bootstrap_ridge(x: &Matrix, y: &[f64], config: RidgeConfig, k: usize, seed: u64) -> Result<Vec<RidgeModel>> {
    if k == 0 {
        return Err(Error::Usage("ensemble size must be at least 1".into()));
    }
    if x.rows() != y.len() || x.rows() == 0 {
        return Err(Error::ShapeMismatch { op: "bootstrap", lhs: vec![x.rows()], rhs: vec![y.len()] });
    }
    let n = x.rows();
    (0..k as u64)
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(m));
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let rows: Vec<&[f64]> = idx.iter().map(|&i| x.row(i)).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            RidgeModel::fit(&Matrix::from_rows(&rows)?, &ys, config)
                .map_err(|e| Error::Data(format!("bootstrap member {m}: {e}")))
        })
        .collect()
}

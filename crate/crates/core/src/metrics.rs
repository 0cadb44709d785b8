//! Pearson correlation, mean absolute error and per-corpus evaluation
//! reports.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{Corpus, Entry};
use crate::error::{Error, Result};

/// Reference scores of the best single-word submission on the test split,
/// kept for side-by-side display in reports.
pub const REFERENCE_PEARSON: f64 = 0.7237;
pub const REFERENCE_MAE: f64 = 0.0677;

fn check_lengths(pred: &[f64], gold: &[f64], op: &'static str) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::ShapeMismatch { op, lhs: alloc::vec![pred.len()], rhs: alloc::vec![gold.len()] });
    }
    if pred.is_empty() {
        return Err(Error::Usage(format!("{op} of empty vectors")));
    }
    Ok(())
}

/// Sample Pearson correlation. Constant input is an error rather than NaN.
pub fn pearson(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(pred, gold, "pearson")?;
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two points"));
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gold.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        let (dx, dy) = (p - mp, g - mg);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("predictions are constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("gold scores are constant"));
    }
    let r = sxy / libm::sqrt(sxx * syy);
    Ok(r.clamp(-1.0, 1.0))
}

pub fn mae(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(pred, gold, "mae")?;
    Ok(pred.iter().zip(gold).map(|(p, g)| (p - g).abs()).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMetrics {
    /// `None` when the slice has fewer than two entries or a constant side.
    pub pearson: Option<f64>,
    pub mae: f64,
    pub n: usize,
}

impl SliceMetrics {
    fn compute(pred: &[f64], gold: &[f64]) -> Result<Self> {
        let pearson = match pearson(pred, gold) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(SliceMetrics { pearson, mae: mae(pred, gold)?, n: pred.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstEntry {
    pub id: String,
    pub corpus: Corpus,
    pub target: String,
    pub predicted: f64,
    pub gold: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: SliceMetrics,
    pub per_corpus: BTreeMap<String, SliceMetrics>,
    /// Largest absolute residuals first; ties keep input order.
    pub worst: Vec<WorstEntry>,
}

/// Scores `preds` (aligned with `entries`) overall, per corpus and by the
/// `k` largest absolute residuals.
pub fn build_report(entries: &[Entry], preds: &[f64], k: usize) -> Result<EvalReport> {
    if entries.len() != preds.len() {
        return Err(Error::ShapeMismatch { op: "build_report", lhs: alloc::vec![entries.len()], rhs: alloc::vec![preds.len()] });
    }
    let mut gold = Vec::with_capacity(entries.len());
    for e in entries {
        gold.push(e.gold.ok_or_else(|| Error::Data(format!("entry {} has no gold score", e.id)))?);
    }
    let overall = SliceMetrics::compute(preds, &gold)?;
    let mut slices: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((e, p), g) in entries.iter().zip(preds).zip(&gold) {
        let slot = slices.entry(String::from(e.corpus.as_str())).or_default();
        slot.0.push(*p);
        slot.1.push(*g);
    }
    let per_corpus = slices
        .into_iter()
        .map(|(name, (p, g))| SliceMetrics::compute(&p, &g).map(|m| (name, m)))
        .collect::<Result<_>>()?;
    let mut worst: Vec<WorstEntry> = entries
        .iter()
        .zip(preds)
        .zip(&gold)
        .map(|((e, p), g)| WorstEntry {
            id: e.id.clone(),
            corpus: e.corpus,
            target: e.target.clone(),
            predicted: *p,
            gold: *g,
            residual: (p - g).abs(),
        })
        .collect();
    worst.sort_by(|a, b| b.residual.total_cmp(&a.residual));
    worst.truncate(k);
    Ok(EvalReport { overall, per_corpus, worst })
}

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Named, column-labelled dense matrix produced by one extractor.
/// Blocks concatenate positionally into model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub name: String,
    column_names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureBlock {
    /// Validates the column count and rejects NaN/Inf values.
    pub fn new(name: impl Into<String>, column_names: Vec<String>, rows: usize, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if data.len() != rows * column_names.len() {
            return Err(Error::ShapeMismatch {
                op: "feature block",
                lhs: alloc::vec![rows, column_names.len()],
                rhs: alloc::vec![data.len()],
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let cols = column_names.len();
            return Err(Error::Data(alloc::format!(
                "block {name}: non-finite value at row {}, column {:?}",
                pos / cols,
                column_names[pos % cols]
            )));
        }
        Ok(FeatureBlock { name, column_names, rows, data })
    }

    pub fn from_rows(name: impl Into<String>, column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let width = column_names.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Data(alloc::format!("row {i} has {} values, expected {width}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(name, column_names, rows.len(), data)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.cols();
        (0..self.rows).map(move |i| self.data[i * w + j])
    }

    /// Keeps the named subset of columns, in the given order.
    pub fn select(&self, keep: &[usize]) -> FeatureBlock {
        let names = keep.iter().map(|&j| self.column_names[j].clone()).collect();
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(keep.iter().map(|&j| row[j]));
        }
        FeatureBlock { name: self.name.clone(), column_names: names, rows: self.rows, data }
    }

    /// Side-by-side concatenation of blocks with equal row counts.
    pub fn hconcat(name: impl Into<String>, blocks: &[&FeatureBlock]) -> Result<FeatureBlock> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(Error::Data(alloc::format!("block {} has {} rows, expected {rows}", b.name, b.rows)));
        }
        let names = blocks.iter().flat_map(|b| b.column_names.iter().cloned()).collect();
        let mut data = Vec::new();
        for i in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(i));
            }
        }
        Self::new(name, names, rows, data)
    }
}

/// Keeps exactly the columns whose fraction of non-zero entries is at least
/// `min_coverage`, preserving order. An all-dropped result is a valid empty
/// block (with a warning).
pub fn coverage_filter(block: &FeatureBlock, min_coverage: f64) -> Result<(FeatureBlock, Vec<String>)> {
    if block.rows() == 0 {
        return Err(Error::Usage("coverage filter on an empty block".into()));
    }
    let n = block.rows() as f64;
    let keep: Vec<usize> = (0..block.cols())
        .filter(|&j| block.column(j).filter(|v| *v != 0.0).count() as f64 / n >= min_coverage)
        .collect();
    if keep.is_empty() {
        log::warn!("coverage filter dropped every column of block {}", block.name);
    }
    let out = block.select(&keep);
    let names = out.column_names().to_vec();
    Ok((out, names))
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lcp_core::features::FeatureBlock;

use super::{read_text, write_text};
use crate::error::{LcpError, Result};

/// Submission format: `entry_id<TAB>score` with six decimals, no header.
pub fn format_predictions(ids: &[String], scores: &[f64]) -> String {
    let mut out = String::with_capacity(ids.len() * 24);
    for (id, s) in ids.iter().zip(scores) {
        let _ = writeln!(out, "{id}\t{s:.6}");
    }
    out
}

pub fn save_predictions(path: &Path, ids: &[String], scores: &[f64]) -> Result<()> {
    write_text(path, &format_predictions(ids, scores))
}

/// Reads a prediction file into `(id, score)` pairs, rejecting duplicate ids.
pub fn parse_predictions(path: &Path, text: &str) -> Result<Vec<(String, f64)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, score) = line.split_once('\t').ok_or_else(|| LcpError::parse(path, i + 1, "expected `id<TAB>score`"))?;
        let score: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| LcpError::parse(path, i + 1, format!("bad score {score:?}")))?;
        if seen.insert(id.to_string(), i + 1).is_some() {
            return Err(LcpError::parse(path, i + 1, format!("duplicate prediction for {id:?}")));
        }
        out.push((id.to_string(), score));
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<(String, f64)>> {
    parse_predictions(path, &read_text(path)?)
}

/// Feature matrix as TSV: header `id` plus the column names, then one row
/// per entry.
pub fn format_features(ids: &[String], block: &FeatureBlock) -> String {
    let mut out = String::from("id");
    for c in block.column_names() {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in block.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

/// Reads a TSV with an `id` column followed by numeric columns (feature
/// dumps and annotation files).
pub fn parse_feature_table(path: &Path, text: &str, name: &str) -> Result<(Vec<String>, FeatureBlock)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| LcpError::parse(path, 1, "empty file, expected a header row"))?;
    let mut cols = header.split('\t');
    if cols.next() != Some("id") {
        return Err(LcpError::parse(path, 1, "first column must be `id`"));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        ids.push(f.next().unwrap_or_default().to_string());
        let row: Vec<f64> = f
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| LcpError::parse(path, i + 1, format!("bad value {v:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(LcpError::parse(path, i + 1, format!("expected {} values, found {}", names.len(), row.len())));
        }
        data.extend(row);
    }
    let rows = ids.len();
    Ok((ids, FeatureBlock::new(name, names, rows, data)?))
}

/// Precomputed per-entry indices keyed by entry id.
#[derive(Debug, Clone)]
pub struct Annotations {
    pub columns: Vec<String>,
    rows: BTreeMap<String, Vec<f64>>,
}

/// Prefix given to annotation columns inside the hand-crafted block.
pub const ANNOTATION_PREFIX: &str = "annot:";

impl Annotations {
    pub fn load(path: &Path) -> Result<Self> {
        let (ids, block) = parse_feature_table(path, &read_text(path)?, "annotations")?;
        let mut rows = BTreeMap::new();
        for (i, id) in ids.into_iter().enumerate() {
            if rows.insert(id.clone(), block.row(i).to_vec()).is_some() {
                return Err(LcpError::Data(format!("{}: duplicate id {id:?}", path.display())));
            }
        }
        let columns = block.column_names().iter().map(|c| format!("{ANNOTATION_PREFIX}{c}")).collect();
        Ok(Annotations { columns, rows })
    }

    /// Rows for `ids`; ids without annotations get zeros.
    pub fn block(&self, ids: &[&str]) -> Result<FeatureBlock> {
        let zeros = vec![0.0; self.columns.len()];
        let missing = ids.iter().filter(|id| !self.rows.contains_key(**id)).count();
        if missing > 0 {
            log::warn!("{missing} entries have no annotation row; using zeros");
        }
        let rows: Vec<Vec<f64>> = ids.iter().map(|id| self.rows.get(*id).unwrap_or(&zeros).clone()).collect();
        Ok(FeatureBlock::from_rows("annotations", self.columns.clone(), &rows)?)
    }
}

/// `key=value` lines in a `<file>.meta` sidecar.
pub fn write_sidecar(path: &Path, fields: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in fields {
        let _ = writeln!(out, "{k}={v}");
    }
    write_text(&sidecar_path(path), &out)
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    path.with_file_name(name)
}

pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, String>> {
    let p = sidecar_path(path);
    Ok(read_text(&p)?
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

use std::fmt::Write as _;
use std::path::Path;

use lcp_core::dataset::{ContextVectorTable, OovPolicy, WordVectorTable};

use super::{read_text, write_text};
use crate::error::{LcpError, Result};

/// Word table plus what the loader skipped.
#[derive(Debug, Clone)]
pub struct WordVectors {
    pub table: WordVectorTable,
    /// Lines repeating an earlier token; the first occurrence was kept.
    pub duplicates: usize,
    /// `(line, reason)` for lines with the wrong arity or bad numbers.
    pub rejected: Vec<(usize, String)>,
}

fn parse_values(fields: &[&str], dim: usize) -> std::result::Result<Vec<f64>, String> {
    if fields.len() != dim {
        return Err(format!("expected {dim} values, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("bad value {f:?}")),
        })
        .collect()
}

/// Parses `token v1 .. vdim` lines. Bad lines are skipped and listed;
/// a file with no usable line is an error.
pub fn parse_word_vectors(path: &Path, text: &str, dim: usize, oov: OovPolicy) -> Result<WordVectors> {
    let mut table = WordVectorTable::new(dim, oov)?;
    let mut duplicates = 0;
    let mut rejected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_ascii_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match parse_values(&rest, dim) {
            Ok(v) => {
                if !table.insert(token, v)? {
                    duplicates += 1;
                }
            }
            Err(reason) => rejected.push((i + 1, reason)),
        }
    }
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate tokens ignored (first occurrence kept)", path.display());
    }
    for (line, reason) in rejected.iter().take(5) {
        log::warn!("{}:{line}: rejected word vector: {reason}", path.display());
    }
    if table.is_empty() {
        return Err(LcpError::Data(format!("{}: no word vector of dimension {dim} could be parsed", path.display())));
    }
    Ok(WordVectors { table, duplicates, rejected })
}

pub fn load_word_vectors(path: &Path, dim: usize, oov: OovPolicy) -> Result<WordVectors> {
    parse_word_vectors(path, &read_text(path)?, dim, oov)
}

/// Parses `entry_id v1 .. vdim` lines. Any bad line or duplicate id fails
/// the load.
pub fn parse_context_vectors(path: &Path, text: &str, dim: usize) -> Result<ContextVectorTable> {
    let mut table = ContextVectorTable::new(dim)?;
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_ascii_whitespace();
        let Some(id) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        let v = parse_values(&rest, dim).map_err(|reason| LcpError::parse(path, i + 1, reason))?;
        if table.get(id).is_some() {
            return Err(LcpError::parse(path, i + 1, format!("duplicate entry id {id:?}")));
        }
        table.insert(id, v)?;
    }
    Ok(table)
}

pub fn load_context_vectors(path: &Path, dim: usize) -> Result<ContextVectorTable> {
    parse_context_vectors(path, &read_text(path)?, dim)
}

/// Loads and merges several context files; an id may appear in only one.
pub fn load_context_files(paths: &[impl AsRef<Path>], dim: usize) -> Result<ContextVectorTable> {
    let mut table = ContextVectorTable::new(dim)?;
    for p in paths {
        let part = load_context_vectors(p.as_ref(), dim)?;
        if let Some((id, _)) = part.iter().find(|(id, _)| table.get(id).is_some()) {
            return Err(LcpError::Data(format!("{}: entry id {id:?} already loaded from another file", p.as_ref().display())));
        }
        table.extend(part)?;
    }
    Ok(table)
}

fn format_rows<'a>(rows: impl Iterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut out = String::new();
    for (key, v) in rows {
        out.push_str(key);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

pub fn format_word_vectors(table: &WordVectorTable) -> String {
    format_rows(table.iter())
}

pub fn format_context_vectors(table: &ContextVectorTable) -> String {
    format_rows(table.iter())
}

pub fn save_word_vectors(path: &Path, table: &WordVectorTable) -> Result<()> {
    write_text(path, &format_word_vectors(table))
}

pub fn save_context_vectors(path: &Path, table: &ContextVectorTable) -> Result<()> {
    write_text(path, &format_context_vectors(table))
}

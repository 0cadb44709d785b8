use std::fmt::Write as _;
use std::path::Path;

use lcp_core::dataset::Entry;

use super::{read_text, write_text};
use crate::error::{LcpError, Result};

const LABELED: [&str; 5] = ["id", "corpus", "sentence", "token", "complexity"];

/// A row that parsed but could not become an [`Entry`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    /// 1-based line number in the source file.
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub entries: Vec<Entry>,
    pub rejects: Vec<Reject>,
    pub labeled: bool,
}

/// Parses a dataset TSV. The header decides whether a `complexity` column
/// is present. Rows with the wrong column count or an unparsable score fail
/// the whole load; rows whose target is not in the sentence (or whose score
/// is out of range) go to `rejects`.
pub fn parse_dataset(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines.next().ok_or_else(|| LcpError::parse(path, 1, "empty file, expected a header row"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let labeled = match cols.len() {
        5 if cols == LABELED => true,
        4 if cols == LABELED[..4] => false,
        _ => {
            return Err(LcpError::parse(path, 1, format!("header must be `{}` (complexity optional), got {header:?}", LABELED.join(" "))))
        }
    };
    let width = cols.len();
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = row.split('\t').collect();
        if f.len() != width {
            return Err(LcpError::parse(path, line, format!("expected {width} columns, found {}", f.len())));
        }
        let gold = match labeled {
            true => Some(
                f[4].trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|g| g.is_finite())
                    .ok_or_else(|| LcpError::parse(path, line, format!("complexity {:?} is not a number", f[4])))?,
            ),
            false => None,
        };
        match Entry::from_raw(f[0], f[1], f[2], f[3], gold) {
            Ok(e) => entries.push(e),
            Err(e) => rejects.push(Reject { line, id: f[0].trim().to_string(), reason: e.to_string() }),
        }
    }
    Ok(Dataset { entries, rejects, labeled })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(path, &read_text(path)?)
}

/// Serializes entries in the input format. Sentences and targets are written
/// normalized, so reloading yields identical entries. The complexity column
/// is written when every entry is labeled.
pub fn format_dataset(entries: &[Entry]) -> String {
    let labeled = !entries.is_empty() && entries.iter().all(|e| e.gold.is_some());
    let mut out = String::new();
    out.push_str(&LABELED[..if labeled { 5 } else { 4 }].join("\t"));
    out.push('\n');
    for e in entries {
        let _ = write!(out, "{}\t{}\t{}\t{}", e.id, e.corpus, e.sentence, e.target);
        if let (true, Some(g)) = (labeled, e.gold) {
            let _ = write!(out, "\t{g}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, entries: &[Entry]) -> Result<()> {
    write_text(path, &format_dataset(entries))
}

pub fn format_rejects(rejects: &[Reject]) -> String {
    let mut out = String::from("line\tid\treason\n");
    for r in rejects {
        let _ = writeln!(out, "{}\t{}\t{}", r.line, r.id, r.reason.replace(['\t', '\n'], " "));
    }
    out
}

use std::path::Path;

use lcp_core::features::{LexiconKind, LexiconResource};

use crate::error::{LcpError, Result};

/// Parses a `lemma,v1,..,vk` CSV with a header row. Duplicate lemmas keep
/// their first row.
pub fn parse_lexicon(path: &Path, kind: LexiconKind, reader: impl std::io::Read) -> Result<LexiconResource> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let width = 1 + kind.arity();
    let header_width = csv.headers().map_err(|e| LcpError::parse(path, 1, e.to_string()))?.len();
    if header_width != width {
        return Err(LcpError::parse(path, 1, format!("{} header needs {width} columns, found {header_width}", kind.name())));
    }
    let mut res = LexiconResource::new(kind);
    let mut duplicates = 0;
    for record in csv.records() {
        let record = record.map_err(|e| LcpError::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(LcpError::parse(path, line, format!("expected {width} columns, found {}", record.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| LcpError::parse(path, line, format!("bad value {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        match res.insert(&record[0], values) {
            Ok(true) => {}
            Ok(false) => duplicates += 1,
            Err(e) => return Err(LcpError::parse(path, line, e.to_string())),
        }
    }
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate lemmas ignored", path.display());
    }
    Ok(res)
}

/// One resource per [`LexiconKind`], read from `<dir>/<name>.csv`. Missing
/// files (or no directory at all) yield unavailable resources, which
/// contribute only their missing-indicator column.
pub fn load_lexicon_dir(dir: Option<&Path>) -> Result<Vec<LexiconResource>> {
    LexiconKind::ALL
        .iter()
        .map(|&kind| {
            let Some(dir) = dir else { return Ok(LexiconResource::unavailable(kind)) };
            let path = dir.join(format!("{}.csv", kind.name()));
            match std::fs::File::open(&path) {
                Ok(f) => parse_lexicon(&path, kind, std::io::BufReader::new(f)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    log::warn!("lexicon {} not found; only its missing indicator is emitted", path.display());
                    Ok(LexiconResource::unavailable(kind))
                }
                Err(e) => Err(LcpError::io(&path, e)),
            }
        })
        .collect()
}

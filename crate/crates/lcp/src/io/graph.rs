use std::fmt::Write as _;
use std::path::Path;

use lcp_core::graph::TextGraph;
use lcp_core::linalg::SparseMatrix;

use super::{read_text, write_text};
use crate::error::{LcpError, Result};

const MAGIC: &str = "LCPGRAPH 1";

/// Node table then edge list: `doc <name>` and `word <word>` lines in node
/// order, then one `i j weight` line per stored (directed) entry of the raw
/// adjacency. The normalized matrix is recomputed on load.
pub fn format_graph(g: &TextGraph) -> String {
    let mut out = format!("{MAGIC}\n");
    for d in g.doc_names() {
        let _ = writeln!(out, "doc {d}");
    }
    for w in g.words() {
        let _ = writeln!(out, "word {w}");
    }
    for (i, j, v) in g.adjacency().triplets() {
        let _ = writeln!(out, "{i} {j} {v}");
    }
    out
}

pub fn parse_graph(path: &Path, text: &str) -> Result<TextGraph> {
    let mut docs = Vec::new();
    let mut words = Vec::new();
    let mut triplets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if n == 1 {
            if line != MAGIC {
                return Err(LcpError::parse(path, n, format!("expected {MAGIC:?}")));
            }
            continue;
        }
        if let Some(name) = line.strip_prefix("doc ") {
            if !words.is_empty() || !triplets.is_empty() {
                return Err(LcpError::parse(path, n, "document nodes must come first"));
            }
            docs.push(name.to_string());
        } else if let Some(word) = line.strip_prefix("word ") {
            if !triplets.is_empty() {
                return Err(LcpError::parse(path, n, "node table must precede edges"));
            }
            words.push(word.to_string());
        } else {
            let f: Vec<&str> = line.split(' ').collect();
            let edge = match f[..] {
                [a, b, w] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()).zip(w.parse::<f64>().ok()),
                _ => None,
            };
            let ((a, b), w) = edge.ok_or_else(|| LcpError::parse(path, n, "expected `i j weight`"))?;
            triplets.push((a, b, w));
        }
    }
    let n = docs.len() + words.len();
    let adjacency = SparseMatrix::from_triplets(n, n, triplets).map_err(|e| LcpError::Data(format!("{}: {e}", path.display())))?;
    Ok(TextGraph::from_adjacency(docs, words, adjacency)?)
}

pub fn save_graph(path: &Path, g: &TextGraph) -> Result<()> {
    write_text(path, &format_graph(g))
}

pub fn load_graph(path: &Path) -> Result<TextGraph> {
    parse_graph(path, &read_text(path)?)
}

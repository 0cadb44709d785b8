//! Text and binary file formats.

mod checkpoint;
mod dataset;
mod graph;
mod lexicon;
mod tables;
mod vectorizer;
mod vectors;

use std::path::Path;

use crate::error::{LcpError, Result};

pub use checkpoint::Checkpoint;
pub use dataset::{format_dataset, format_rejects, load_dataset, parse_dataset, save_dataset, Dataset, Reject};
pub use graph::{format_graph, load_graph, parse_graph, save_graph};
pub use lexicon::{load_lexicon_dir, parse_lexicon};
pub use tables::{
    format_features, format_predictions, load_predictions, parse_feature_table, parse_predictions, read_sidecar, save_predictions,
    sidecar_path, write_sidecar, Annotations, ANNOTATION_PREFIX,
};
pub use vectorizer::{format_vectorizer, load_vectorizer, parse_vectorizer, save_vectorizer};
pub use vectors::{
    format_context_vectors, format_word_vectors, load_context_files, load_context_vectors, load_word_vectors, parse_context_vectors,
    parse_word_vectors, save_context_vectors, save_word_vectors, WordVectors,
};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LcpError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LcpError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| LcpError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

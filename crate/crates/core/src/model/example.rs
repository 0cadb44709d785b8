use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ModelConfig;
use crate::dataset::{target_word_embedding, ContextVectorTable, Entry, WordVectorTable};
use crate::error::{Error, Result};
use crate::features::FeatureBlock;
use crate::graph::TextGraph;

/// Everything the network needs about one entry, resolved from the loaded
/// tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub word: Vec<f64>,
    pub context: Vec<f64>,
    /// Input of the character encoder.
    pub target: String,
    pub doc_node: Option<usize>,
    /// Raw hand-crafted values; the model standardizes them.
    pub handcrafted: Vec<f64>,
    pub gold: Option<f64>,
}

/// Lookup tables for building examples. `handcrafted` rows align with the
/// entries passed alongside it.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSources<'a> {
    pub words: &'a WordVectorTable,
    pub contexts: &'a ContextVectorTable,
    pub graph: Option<&'a TextGraph>,
    pub handcrafted: Option<&'a FeatureBlock>,
}

impl FeatureSources<'_> {
    fn check(&self, config: &ModelConfig, n_entries: usize) -> Result<()> {
        if self.words.dim() != config.word_dim {
            return Err(Error::ShapeMismatch { op: "word vectors", lhs: alloc::vec![self.words.dim()], rhs: alloc::vec![config.word_dim] });
        }
        if self.contexts.dim() != config.context_dim {
            return Err(Error::ShapeMismatch {
                op: "context vectors",
                lhs: alloc::vec![self.contexts.dim()],
                rhs: alloc::vec![config.context_dim],
            });
        }
        if config.use_gcn && self.graph.is_none() {
            return Err(Error::Usage("graph block enabled but no text graph given".into()));
        }
        if config.use_handcrafted {
            let block = self.handcrafted.ok_or_else(|| Error::Usage("hand-crafted block enabled but no features given".into()))?;
            if block.rows() != n_entries {
                return Err(Error::ShapeMismatch { op: "hand-crafted rows", lhs: alloc::vec![block.rows()], rhs: alloc::vec![n_entries] });
            }
        }
        Ok(())
    }
}

/// Resolves entry `row` of the batch the sources were built for.
pub fn build_example(entry: &Entry, row: usize, sources: &FeatureSources<'_>, config: &ModelConfig) -> Result<Example> {
    let context = sources
        .contexts
        .get(&entry.id)
        .ok_or_else(|| Error::MissingContext(alloc::vec![entry.id.clone()]))?
        .to_vec();
    let doc_node = if config.use_gcn {
        let graph = sources.graph.ok_or_else(|| Error::Usage("graph block enabled but no text graph given".into()))?;
        Some(graph.doc_node(&entry.id).ok_or_else(|| Error::Data(format!("entry {} is not a node of the text graph", entry.id)))?)
    } else {
        None
    };
    let handcrafted = match (config.use_handcrafted, sources.handcrafted) {
        (true, Some(block)) => block.row(row).to_vec(),
        (true, None) => return Err(Error::Usage("hand-crafted block enabled but no features given".into())),
        (false, _) => Vec::new(),
    };
    Ok(Example {
        id: entry.id.clone(),
        word: target_word_embedding(entry, sources.words),
        context,
        target: entry.target.clone(),
        doc_node,
        handcrafted,
        gold: entry.gold,
    })
}

/// Builds every example, failing with the full list of ids that lack a
/// contextual vector.
pub fn assemble_examples(entries: &[Entry], sources: &FeatureSources<'_>, config: &ModelConfig) -> Result<Vec<Example>> {
    sources.check(config, entries.len())?;
    let missing: Vec<String> = entries.iter().filter(|e| sources.contexts.get(&e.id).is_none()).map(|e| e.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingContext(missing));
    }
    entries.iter().enumerate().map(|(i, e)| build_example(e, i, sources, config)).collect()
}

/// Per-entry variant for prediction: entries that cannot be resolved carry
/// their error instead of failing the batch.
pub fn assemble_examples_lenient(
    entries: &[Entry],
    sources: &FeatureSources<'_>,
    config: &ModelConfig,
) -> Result<Vec<Result<Example>>> {
    sources.check(config, entries.len())?;
    Ok(entries.iter().enumerate().map(|(i, e)| build_example(e, i, sources, config)).collect())
}

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{lexicon_column_names, lexicon_features, FeatureBlock, LexiconResource, NgramVectorizer};
use crate::dataset::Entry;
use crate::error::Result;

/// Prefix of the n-gram TF-IDF column names.
pub const NGRAM_PREFIX: &str = "ngram:";

/// Target length in characters and in tokens.
pub const SURFACE_COLUMNS: [&str; 2] = ["target.chars", "target.tokens"];

/// Column names of [`handcrafted_block`] for the same inputs.
pub fn handcrafted_column_names(resources: &[LexiconResource], ngrams: Option<&NgramVectorizer>) -> Vec<String> {
    let mut names: Vec<String> = SURFACE_COLUMNS.iter().map(|s| s.to_string()).collect();
    names.extend(lexicon_column_names(resources));
    if let Some(v) = ngrams {
        names.extend(v.vocabulary().iter().map(|g| format!("{NGRAM_PREFIX}{g}")));
    }
    names
}

/// The hand-crafted battery for `entries`: surface counts, lexicon features
/// (syllables first) and, when a fitted vectorizer is given, TF-IDF of the
/// target's character n-grams.
pub fn handcrafted_block(
    entries: &[Entry],
    resources: &[LexiconResource],
    ngrams: Option<&NgramVectorizer>,
) -> Result<FeatureBlock> {
    let names = handcrafted_column_names(resources, ngrams);
    let tfidf = match ngrams {
        Some(v) => Some(v.transform(&entries.iter().map(|e| e.target.as_str()).collect::<Vec<_>>())?),
        None => None,
    };
    let rows: Vec<Vec<f64>> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut row = Vec::with_capacity(names.len());
            row.push(e.target.chars().count() as f64);
            row.push(e.target_tokens.len() as f64);
            row.extend(lexicon_features(e, resources));
            if let Some(t) = &tfidf {
                row.extend_from_slice(t.row(i));
            }
            row
        })
        .collect();
    FeatureBlock::from_rows("handcrafted", names, &rows)
}

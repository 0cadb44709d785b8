//! Hand-crafted feature battery: syllables, lexicon lookups, character
//! n-gram TF-IDF and coverage-based column selection.

mod battery;
mod block;
mod lexicon;
mod ngram;
mod syllables;

pub use battery::{handcrafted_block, handcrafted_column_names, NGRAM_PREFIX, SURFACE_COLUMNS};
pub use block::{coverage_filter, FeatureBlock};
pub use lexicon::{lexicon_features, lexicon_column_names, LexiconKind, LexiconResource};
pub use ngram::{NgramVectorizer, DEFAULT_MAX_FEATURES};
pub use syllables::syllable_count;
pub(crate) use ngram::smoothed_idf;

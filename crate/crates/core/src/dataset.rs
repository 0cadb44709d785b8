//! Dataset entries and the word/context vector tables they are joined with.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::text::{find_case_insensitive, preprocess_sentence};

/// Sub-corpus an entry was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Corpus {
    Bible,
    Biomed,
    Europarl,
    Other,
}

impl Corpus {
    pub const ALL: [Corpus; 4] = [Corpus::Bible, Corpus::Biomed, Corpus::Europarl, Corpus::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Corpus::Bible => "bible",
            Corpus::Biomed => "biomed",
            Corpus::Europarl => "europarl",
            Corpus::Other => "other",
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corpus {
    type Err = core::convert::Infallible;

    /// Unknown tags map to [`Corpus::Other`].
    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "bible" => Corpus::Bible,
            "biomed" => Corpus::Biomed,
            "europarl" => Corpus::Europarl,
            _ => Corpus::Other,
        })
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub id: String,
    pub corpus: Corpus,
    /// Preprocessed sentence.
    pub sentence: String,
    /// Target phrase, with the same quote/whitespace normalization as the
    /// sentence.
    pub target: String,
    pub target_tokens: Vec<String>,
    /// Byte offsets into `sentence`.
    pub target_char_span: (usize, usize),
    pub gold: Option<f64>,
}

impl Entry {
    /// Builds an entry from raw column values. The sentence and target are
    /// normalized, and the span resolves to the first case-insensitive
    /// occurrence of the target. Errors carry a human-readable reason.
    pub fn from_raw(
        id: &str,
        corpus: &str,
        sentence: &str,
        target: &str,
        gold: Option<f64>,
    ) -> Result<Self> {
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::Data("empty id".into()));
        }
        if let Some(g) = gold {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Data(format!("complexity {g} outside [0,1]")));
            }
        }
        let sentence = preprocess_sentence(sentence);
        let target = preprocess_sentence(target);
        let target_tokens: Vec<String> = target.split(' ').filter(|t| !t.is_empty()).map(ToString::to_string).collect();
        if target_tokens.is_empty() {
            return Err(Error::Data("empty target".into()));
        }
        let span = find_case_insensitive(&sentence, &target)
            .ok_or_else(|| Error::Data(format!("target {target:?} not found in sentence")))?;
        Ok(Entry {
            id: id.to_string(),
            corpus: corpus.parse().unwrap_or(Corpus::Other),
            sentence,
            target,
            target_tokens,
            target_char_span: span,
            gold,
        })
    }

    pub fn target_in_sentence(&self) -> &str {
        &self.sentence[self.target_char_span.0..self.target_char_span.1]
    }
}

/// What a word-vector lookup returns for tokens absent from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Zeros,
    MeanVector,
}

impl FromStr for OovPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(OovPolicy::Zeros),
            "mean_vector" | "mean" => Ok(OovPolicy::MeanVector),
            other => Err(Error::Usage(format!("unknown oov policy {other:?}"))),
        }
    }
}

/// Lowercased token → fixed-width vector.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    oov_policy: OovPolicy,
    mean: Vec<f64>,
}

impl WordVectorTable {
    pub fn new(dim: usize, oov_policy: OovPolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("word vector dim must be positive".into()));
        }
        Ok(WordVectorTable { dim, vectors: BTreeMap::new(), oov_policy, mean: vec![0.0; dim] })
    }

    /// Inserts a vector; returns `Ok(false)` when the (lowercased) token was
    /// already present, in which case the first vector is kept.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch { op: "word vector", lhs: vec![vector.len()], rhs: vec![self.dim] });
        }
        let key = token.to_lowercase();
        if self.vectors.contains_key(&key) {
            return Ok(false);
        }
        let n = self.vectors.len() as f64;
        for (m, v) in self.mean.iter_mut().zip(&vector) {
            *m += (v - *m) / (n + 1.0);
        }
        self.vectors.insert(key, vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn set_oov_policy(&mut self, policy: OovPolicy) {
        self.oov_policy = policy;
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(&token.to_lowercase())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Vector for `token`, falling back to the OOV policy. Always `dim` long.
    pub fn lookup(&self, token: &str) -> Vec<f64> {
        match self.get(token) {
            Some(v) => v.to_vec(),
            None => match self.oov_policy {
                OovPolicy::Zeros => vec![0.0; self.dim],
                OovPolicy::MeanVector => self.mean.clone(),
            },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Entry id → contextual vector.
#[derive(Debug, Clone)]
pub struct ContextVectorTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl ContextVectorTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("context vector dim must be positive".into()));
        }
        Ok(ContextVectorTable { dim, vectors: BTreeMap::new() })
    }

    /// Duplicate ids are an error: two vectors for one entry make the
    /// supervision ambiguous.
    pub fn insert(&mut self, id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch { op: "context vector", lhs: vec![vector.len()], rhs: vec![self.dim] });
        }
        if self.vectors.contains_key(id) {
            return Err(Error::Data(format!("duplicate context vector id {id:?}")));
        }
        self.vectors.insert(id.to_string(), vector);
        Ok(())
    }

    /// Merges another table; ids must not overlap.
    pub fn extend(&mut self, other: ContextVectorTable) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::ShapeMismatch { op: "context table merge", lhs: vec![self.dim], rhs: vec![other.dim] });
        }
        for (id, v) in other.vectors {
            self.insert(&id, v)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Target representation from the word table: the token's vector for single
/// tokens, the component-wise mean for multi-token targets.
pub fn target_word_embedding(entry: &Entry, table: &WordVectorTable) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    for tok in &entry.target_tokens {
        for (a, v) in acc.iter_mut().zip(table.lookup(tok)) {
            *a += v;
        }
    }
    let n = entry.target_tokens.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::dataset::Entry;
use crate::error::{Error, Result};

/// The lexicon resources the feature battery knows about, in the order
/// their columns appear in a feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LexiconKind {
    Mrc,
    Cefr,
    SubImdb,
    SimpWiki,
    SemanticDiversity,
    Sensorimotor,
    WordnetCounts,
    DependencyCounts,
}

const MRC_COLUMNS: [&str; 5] = ["age_of_acquisition", "concreteness", "imageability", "familiarity", "phonemes"];
const SENSORIMOTOR_COLUMNS: [&str; 11] = [
    "auditory",
    "gustatory",
    "haptic",
    "interoceptive",
    "olfactory",
    "visual",
    "foot_leg",
    "hand_arm",
    "head",
    "mouth",
    "torso",
];
const WORDNET_COLUMNS: [&str; 3] = ["synsets", "hypernyms", "hyponyms"];

impl LexiconKind {
    pub const ALL: [LexiconKind; 8] = [
        LexiconKind::Mrc,
        LexiconKind::Cefr,
        LexiconKind::SubImdb,
        LexiconKind::SimpWiki,
        LexiconKind::SemanticDiversity,
        LexiconKind::Sensorimotor,
        LexiconKind::WordnetCounts,
        LexiconKind::DependencyCounts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LexiconKind::Mrc => "mrc",
            LexiconKind::Cefr => "cefr",
            LexiconKind::SubImdb => "subimdb",
            LexiconKind::SimpWiki => "simpwiki",
            LexiconKind::SemanticDiversity => "semantic_diversity",
            LexiconKind::Sensorimotor => "sensorimotor",
            LexiconKind::WordnetCounts => "wordnet_counts",
            LexiconKind::DependencyCounts => "dependency_counts",
        }
    }

    pub fn arity(self) -> usize {
        self.value_columns().len()
    }

    /// Binary presence lists pool by max; everything else by mean.
    pub fn is_presence(self) -> bool {
        matches!(self, LexiconKind::SubImdb | LexiconKind::SimpWiki)
    }

    pub fn value_columns(self) -> Vec<String> {
        let base: &[&str] = match self {
            LexiconKind::Mrc => &MRC_COLUMNS,
            LexiconKind::Sensorimotor => &SENSORIMOTOR_COLUMNS,
            LexiconKind::WordnetCounts => &WORDNET_COLUMNS,
            LexiconKind::Cefr => &["level"],
            LexiconKind::SubImdb | LexiconKind::SimpWiki => &["present"],
            LexiconKind::SemanticDiversity => &["value"],
            LexiconKind::DependencyCounts => &["count"],
        };
        base.iter().map(|c| format!("{}.{c}", self.name())).collect()
    }

    fn validate(self, lemma: &str, values: &[f64]) -> Result<()> {
        if values.len() != self.arity() {
            return Err(Error::Data(format!(
                "{}: {lemma:?} has {} values, expected {}",
                self.name(),
                values.len(),
                self.arity()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{}: {lemma:?} has non-finite value {v}", self.name())));
        }
        match self {
            LexiconKind::Cefr if !(1..=6).any(|l| values[0] == l as f64) => {
                Err(Error::Data(format!("cefr: {lemma:?} level {} not an integer in 1..=6", values[0])))
            }
            LexiconKind::SubImdb | LexiconKind::SimpWiki if values[0] != 0.0 && values[0] != 1.0 => {
                Err(Error::Data(format!("{}: {lemma:?} presence {} not 0/1", self.name(), values[0])))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LexiconKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown lexicon {s:?}")))
    }
}

/// Lemma → value vector for one resource. A resource whose file was not
/// available is `unavailable`: it contributes only its missing indicator
/// (always 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconResource {
    pub kind: LexiconKind,
    entries: Option<BTreeMap<String, Vec<f64>>>,
    pub missing_value: f64,
}

impl LexiconResource {
    pub fn new(kind: LexiconKind) -> Self {
        LexiconResource { kind, entries: Some(BTreeMap::new()), missing_value: 0.0 }
    }

    pub fn unavailable(kind: LexiconKind) -> Self {
        LexiconResource { kind, entries: None, missing_value: 0.0 }
    }

    pub fn is_available(&self) -> bool {
        self.entries.is_some()
    }

    /// Adds a lemma (lowercased). The first occurrence of a lemma wins;
    /// returns `Ok(false)` for a duplicate.
    pub fn insert(&mut self, lemma: &str, values: Vec<f64>) -> Result<bool> {
        self.kind.validate(lemma, &values)?;
        let map = self
            .entries
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("{} resource is unavailable", self.kind.name())))?;
        let key = lemma.trim().to_lowercase();
        if map.contains_key(&key) {
            return Ok(false);
        }
        map.insert(key, values);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.entries.as_ref().map_or(0, BTreeMap::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, lemma: &str) -> Option<&[f64]> {
        self.entries.as_ref()?.get(&lemma.to_lowercase()).map(Vec::as_slice)
    }

    /// Value columns followed by the missing indicator.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols = if self.is_available() { self.kind.value_columns() } else { Vec::new() };
        cols.push(format!("{}.missing", self.kind.name()));
        cols
    }

    fn features(&self, tokens: &[String], out: &mut Vec<f64>) {
        if !self.is_available() {
            out.push(1.0);
            return;
        }
        let arity = self.kind.arity();
        let found: Vec<&[f64]> = tokens.iter().filter_map(|t| self.get(t)).collect();
        if found.is_empty() {
            out.extend(core::iter::repeat(self.missing_value).take(arity));
            out.push(1.0);
            return;
        }
        let mut pooled: Vec<f64> = vec![0.0; arity];
        if self.kind.is_presence() {
            for v in &found {
                pooled.iter_mut().zip(v.iter()).for_each(|(p, x)| *p = (*p).max(*x));
            }
        } else {
            for v in &found {
                pooled.iter_mut().zip(v.iter()).for_each(|(p, x)| *p += x);
            }
            let n = found.len() as f64;
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        out.extend(pooled);
        out.push(0.0);
    }
}

fn ordered(resources: &[LexiconResource]) -> Vec<&LexiconResource> {
    let mut sorted: Vec<&LexiconResource> = resources.iter().collect();
    sorted.sort_by_key(|r| r.kind);
    sorted
}

/// Column names matching [`lexicon_features`] for the same resources.
pub fn lexicon_column_names(resources: &[LexiconResource]) -> Vec<String> {
    let mut names = vec!["syllables".to_string()];
    for r in ordered(resources) {
        names.extend(r.column_names());
    }
    names
}

/// Feature row for the entry's target: mean syllable count over target
/// tokens, then every resource in [`LexiconKind::ALL`] order. Multi-token
/// targets pool numeric values by mean over tokens found in the resource and
/// presence flags by max; each resource ends with a missing indicator that is
/// 1 when no target token is found.
pub fn lexicon_features(entry: &Entry, resources: &[LexiconResource]) -> Vec<f64> {
    let syl: usize = entry.target_tokens.iter().map(|t| crate::features::syllable_count(t)).sum();
    let mut row = vec![syl as f64 / entry.target_tokens.len().max(1) as f64];
    for r in ordered(resources) {
        r.features(&entry.target_tokens, &mut row);
    }
    row
}

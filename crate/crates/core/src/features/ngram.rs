use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::FeatureBlock;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    vocabulary: Vec<String>,
    counts: Vec<usize>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    col_min: Vec<f64>,
    col_max: Vec<f64>,
}

/// Character n-gram TF-IDF vectorizer with a frequency-capped vocabulary
/// and column-wise min-max scaling learned from the fitting corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramVectorizer {
    ngram_range: (usize, usize),
    max_features: usize,
    fitted: Option<Fitted>,
}

/// Smoothed inverse document frequency `ln((1+N)/(1+df)) + 1`.
pub(crate) fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    libm::log((1.0 + n_docs as f64) / (1.0 + df as f64)) + 1.0
}

fn char_ngrams(text: &str, (lo, hi): (usize, usize), mut f: impl FnMut(String)) {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    for n in lo..=hi {
        if n > chars.len() {
            break;
        }
        for w in chars.windows(n) {
            f(w.iter().collect());
        }
    }
}

impl NgramVectorizer {
    pub fn new(ngram_range: (usize, usize), max_features: usize) -> Result<Self> {
        if ngram_range.0 == 0 || ngram_range.0 > ngram_range.1 {
            return Err(Error::Usage(format!("invalid n-gram range {ngram_range:?}")));
        }
        if max_features == 0 {
            return Err(Error::Usage("max_features must be positive".into()));
        }
        Ok(NgramVectorizer { ngram_range, max_features, fitted: None })
    }

    /// Fits on `sentences`: keeps the `max_features` n-grams with the highest
    /// raw corpus count (ties broken lexicographically), computes smoothed
    /// idf and the per-column min/max of the corpus's own TF-IDF matrix.
    pub fn fit<S: AsRef<str>>(ngram_range: (usize, usize), max_features: usize, sentences: &[S]) -> Result<Self> {
        let mut v = Self::new(ngram_range, max_features)?;
        if sentences.is_empty() {
            return Err(Error::Usage("cannot fit an n-gram vectorizer on zero sentences".into()));
        }
        let mut stats: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for s in sentences {
            let mut local: BTreeMap<String, usize> = BTreeMap::new();
            char_ngrams(s.as_ref(), ngram_range, |g| *local.entry(g).or_insert(0) += 1);
            for (g, c) in local {
                let e = stats.entry(g).or_insert((0, 0));
                e.0 += c;
                e.1 += 1;
            }
        }
        let mut ranked: Vec<(String, usize, usize)> = stats.into_iter().map(|(g, (c, df))| (g, c, df)).collect();
        // BTreeMap iteration is already lexicographic, and the sort is stable.
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        ranked.truncate(max_features);
        let n = sentences.len();
        let fitted = Fitted {
            idf: ranked.iter().map(|r| smoothed_idf(n, r.2)).collect(),
            vocabulary: ranked.iter().map(|r| r.0.clone()).collect(),
            counts: ranked.iter().map(|r| r.1).collect(),
            doc_freq: ranked.iter().map(|r| r.2).collect(),
            col_min: Vec::new(),
            col_max: Vec::new(),
        };
        v.fitted = Some(fitted);
        let raw = v.raw_tfidf(sentences)?;
        let width = v.vocabulary().len();
        let mut col_min = vec![f64::INFINITY; width];
        let mut col_max = vec![f64::NEG_INFINITY; width];
        for row in raw.chunks(width.max(1)) {
            for (j, x) in row.iter().enumerate() {
                col_min[j] = col_min[j].min(*x);
                col_max[j] = col_max[j].max(*x);
            }
        }
        let f = v.fitted.as_mut().expect("just fitted");
        f.col_min = col_min;
        f.col_max = col_max;
        Ok(v)
    }

    /// Rebuilds a fitted vectorizer from saved state.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        ngram_range: (usize, usize),
        max_features: usize,
        vocabulary: Vec<String>,
        counts: Vec<usize>,
        doc_freq: Vec<usize>,
        idf: Vec<f64>,
        col_min: Vec<f64>,
        col_max: Vec<f64>,
    ) -> Result<Self> {
        let mut v = Self::new(ngram_range, max_features)?;
        let n = vocabulary.len();
        if [counts.len(), doc_freq.len(), idf.len(), col_min.len(), col_max.len()].iter().any(|&l| l != n) {
            return Err(Error::Data("vectorizer parts have inconsistent lengths".into()));
        }
        if n > max_features {
            return Err(Error::Data(format!("vocabulary of {n} exceeds max_features {max_features}")));
        }
        v.fitted = Some(Fitted { vocabulary, counts, doc_freq, idf, col_min, col_max });
        Ok(v)
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or_else(|| Error::Usage("n-gram vectorizer used before fitting".into()))
    }

    pub fn vocabulary(&self) -> &[String] {
        self.fitted.as_ref().map_or(&[], |f| &f.vocabulary)
    }

    pub fn counts(&self) -> &[usize] {
        self.fitted.as_ref().map_or(&[], |f| &f.counts)
    }

    pub fn doc_freq(&self) -> &[usize] {
        self.fitted.as_ref().map_or(&[], |f| &f.doc_freq)
    }

    pub fn idf(&self) -> &[f64] {
        self.fitted.as_ref().map_or(&[], |f| &f.idf)
    }

    pub fn column_range(&self) -> (&[f64], &[f64]) {
        self.fitted.as_ref().map_or((&[], &[]), |f| (&f.col_min, &f.col_max))
    }

    fn raw_tfidf<S: AsRef<str>>(&self, sentences: &[S]) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let index: BTreeMap<&str, usize> = f.vocabulary.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let width = f.vocabulary.len();
        let mut out = vec![0.0; sentences.len() * width];
        for (r, s) in sentences.iter().enumerate() {
            let row = &mut out[r * width..(r + 1) * width];
            char_ngrams(s.as_ref(), self.ngram_range, |g| {
                if let Some(&j) = index.get(g.as_str()) {
                    row[j] += 1.0;
                }
            });
            row.iter_mut().zip(&f.idf).for_each(|(x, idf)| *x *= idf);
        }
        Ok(out)
    }

    /// TF-IDF (raw counts times smoothed idf) rescaled per column by the
    /// fitting corpus min/max and clipped to `[0, 1]`. Constant columns map
    /// to 0.
    pub fn transform<S: AsRef<str>>(&self, sentences: &[S]) -> Result<FeatureBlock> {
        let f = self.fitted()?;
        let mut data = self.raw_tfidf(sentences)?;
        let width = f.vocabulary.len();
        if width > 0 {
            for row in data.chunks_mut(width) {
                for ((x, lo), hi) in row.iter_mut().zip(&f.col_min).zip(&f.col_max) {
                    let span = hi - lo;
                    *x = if span > 0.0 { ((*x - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
                }
            }
        }
        let names = f.vocabulary.iter().map(|g| format!("ngram:{g}")).collect();
        FeatureBlock::new("char_ngrams", names, sentences.len(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force TF-IDF: enumerate substrings directly by byte slicing
    /// (ASCII corpus), count, and apply the formulas by hand.
    fn oracle_tfidf(corpus: &[&str], vocab: &[String]) -> Vec<Vec<f64>> {
        let n = corpus.len() as f64;
        let count = |s: &str, g: &str| {
            let s = s.to_lowercase();
            (0..s.len()).filter(|&i| s[i..].starts_with(g)).count() as f64
        };
        let idf: Vec<f64> = vocab
            .iter()
            .map(|g| {
                let df = corpus.iter().filter(|s| count(s, g) > 0.0).count() as f64;
                libm::log((1.0 + n) / (1.0 + df)) + 1.0
            })
            .collect();
        corpus.iter().map(|s| vocab.iter().zip(&idf).map(|(g, i)| count(s, g) * i).collect()).collect()
    }

    #[test]
    fn small_vocabularies() {
        let v = NgramVectorizer::fit((2, 2), 5000, &["aa"]).unwrap();
        assert_eq!(v.vocabulary(), ["aa"]);
        assert_eq!(v.doc_freq(), [1]);
        let v = NgramVectorizer::fit((2, 2), 1, &["ab", "ab", "cd"]).unwrap();
        assert_eq!(v.vocabulary(), ["ab"]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = NgramVectorizer::fit((1, 1), 3, &["cba", "d"]).unwrap();
        assert_eq!(v.vocabulary(), ["a", "b", "c"]);
    }

    #[test]
    fn toy_corpus_matches_hand_computation() {
        let corpus = ["abab", "ba", "abc", "cc", "bca", "aaa"];
        let v = NgramVectorizer::fit((2, 3), 5000, &corpus).unwrap();
        let vocab = v.vocabulary().to_vec();
        // "ab": counts 2+0+1+0+0+0 = 3, df 2 -> idf ln(7/3)+1
        let ab = vocab.iter().position(|g| g == "ab").unwrap();
        assert!((v.idf()[ab] - (libm::log(7.0 / 3.0) + 1.0)).abs() < 1e-15);
        let raw = oracle_tfidf(&corpus, &vocab);
        let block = v.transform(&corpus).unwrap();
        for j in 0..vocab.len() {
            let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..corpus.len() {
                let expect = if hi > lo { (raw[i][j] - lo) / (hi - lo) } else { 0.0 };
                assert!((block.row(i)[j] - expect).abs() < 1e-12, "{} row {i}", vocab[j]);
            }
            let got: Vec<f64> = block.column(j).collect();
            if hi > lo {
                assert_eq!(got.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
                assert_eq!(got.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
        }
    }

    #[test]
    fn zero_hits_and_unfitted() {
        let v = NgramVectorizer::fit((2, 2), 10, &["abc", "abd"]).unwrap();
        let b = v.transform(&["zzz"]).unwrap();
        assert!(b.row(0).iter().all(|x| *x == 0.0));
        let u = NgramVectorizer::new((2, 4), 10).unwrap();
        assert!(matches!(u.transform(&["x"]), Err(Error::Usage(_))));
        assert!(NgramVectorizer::new((3, 2), 10).is_err());
    }

    proptest::proptest! {
        #[test]
        fn outputs_bounded_and_fit_deterministic(
            corpus in proptest::collection::vec("[a-e ]{0,12}", 1..8),
            probe in proptest::collection::vec("[a-g ]{0,12}", 1..4),
            cap in 1usize..30,
        ) {
            let v = NgramVectorizer::fit((2, 4), cap, &corpus).unwrap();
            proptest::prop_assert!(v.vocabulary().len() <= cap);
            let again = NgramVectorizer::fit((2, 4), cap, &corpus).unwrap();
            proptest::prop_assert_eq!(&v, &again);
            for block in [v.transform(&corpus).unwrap(), v.transform(&probe).unwrap()] {
                proptest::prop_assert!(block.data().iter().all(|x| (0.0..=1.0).contains(x)));
            }
            let counts = v.counts();
            proptest::prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

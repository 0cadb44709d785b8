use std::fmt::Write as _;
use std::path::Path;

use lcp_core::features::NgramVectorizer;

use super::{read_text, write_text};
use crate::error::{LcpError, Result};

const MAGIC: &str = "LCPVEC 1";

/// Text form of a fitted vectorizer: a magic line, the n-gram range and
/// cap, then one n-gram per line in vocabulary order as
/// `gram<TAB>count<TAB>df<TAB>idf<TAB>min<TAB>max`. The last two are the
/// fitting-corpus column range used for rescaling.
pub fn format_vectorizer(v: &NgramVectorizer) -> String {
    let (lo, hi) = v.ngram_range();
    let mut out = format!("{MAGIC}\nngram_range {lo} {hi}\nmax_features {}\n", v.max_features());
    let (cmin, cmax) = v.column_range();
    for (i, gram) in v.vocabulary().iter().enumerate() {
        let _ = writeln!(out, "{gram}\t{}\t{}\t{}\t{}\t{}", v.counts()[i], v.doc_freq()[i], v.idf()[i], cmin[i], cmax[i]);
    }
    out
}

pub fn parse_vectorizer(path: &Path, text: &str) -> Result<NgramVectorizer> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| LcpError::parse(path, 0, format!("truncated vectorizer, expected {what}")));
    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err(LcpError::parse(path, n, format!("expected {MAGIC:?}")));
    }
    let (n, range) = next("ngram_range")?;
    let range: Vec<usize> = match range.strip_prefix("ngram_range ") {
        Some(r) => r.split(' ').map(str::parse).collect::<std::result::Result<_, _>>().map_err(|e| LcpError::parse(path, n, format!("{e}")))?,
        None => return Err(LcpError::parse(path, n, "expected `ngram_range <min> <max>`")),
    };
    let [lo, hi] = range[..] else { return Err(LcpError::parse(path, n, "ngram_range takes two values")) };
    let (n, cap) = next("max_features")?;
    let max_features: usize = cap
        .strip_prefix("max_features ")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| LcpError::parse(path, n, "expected `max_features <n>`"))?;
    let mut vocab: Vec<String> = Vec::new();
    let (mut counts, mut df): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    let (mut idf, mut cmin, mut cmax): (Vec<f64>, Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(LcpError::parse(path, n, format!("expected 6 fields, found {}", f.len())));
        }
        let bad = |e: &dyn std::fmt::Display| LcpError::parse(path, n, e.to_string());
        vocab.push(f[0].to_string());
        counts.push(f[1].parse().map_err(|e| bad(&e))?);
        df.push(f[2].parse().map_err(|e| bad(&e))?);
        idf.push(f[3].parse().map_err(|e| bad(&e))?);
        cmin.push(f[4].parse().map_err(|e| bad(&e))?);
        cmax.push(f[5].parse().map_err(|e| bad(&e))?);
    }
    Ok(NgramVectorizer::from_parts((lo, hi), max_features, vocab, counts, df, idf, cmin, cmax)?)
}

pub fn save_vectorizer(path: &Path, v: &NgramVectorizer) -> Result<()> {
    write_text(path, &format_vectorizer(v))
}

pub fn load_vectorizer(path: &Path) -> Result<NgramVectorizer> {
    parse_vectorizer(path, &read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_preserves_transform(corpus in prop::collection::vec("[a-c ]{1,12}", 1..10), max in 1usize..40) {
            let v = NgramVectorizer::fit((2, 3), max, &corpus).unwrap();
            let text = format_vectorizer(&v);
            let back = parse_vectorizer(Path::new("v"), &text).unwrap();
            prop_assert_eq!(back.vocabulary(), v.vocabulary());
            prop_assert_eq!(back.idf(), v.idf());
            prop_assert_eq!(back.transform(&corpus).unwrap(), v.transform(&corpus).unwrap());
            prop_assert_eq!(format_vectorizer(&back), text);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_vectorizer(Path::new("v"), "nope\n").is_err());
        assert!(matches!(
            parse_vectorizer(Path::new("v"), "LCPVEC 1\nngram_range 2 4\nmax_features 5\nab\t1\t1\n"),
            Err(LcpError::Parse { line: 4, .. })
        ));
    }
}

//! Heterogeneous document-word graph and two-layer graph convolution.
//!
//! Node order is `[documents..., words...]`. Word-word edges carry positive
//! PMI from sliding windows, document-word edges carry TF-IDF, and there are
//! no document-document edges. Propagation uses the symmetric normalization
//! `Â = D^{-1/2}(A + I)D^{-1/2}`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::smoothed_idf;
use crate::linalg::SparseMatrix;
use crate::nn::layers::join;
use crate::nn::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::text::graph_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub window: usize,
    pub min_word_count: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { window: 20, min_word_count: 2 }
    }
}

/// Document-word graph with its normalized propagation matrix cached.
#[derive(Debug, Clone)]
pub struct TextGraph {
    doc_names: Vec<String>,
    words: Vec<String>,
    word_index: BTreeMap<String, usize>,
    adjacency: SparseMatrix,
    normalized: Arc<SparseMatrix>,
}

/// `D^{-1/2}(A + I)D^{-1/2}` where `D` is the degree matrix of `A + I`.
/// `A` must be square, symmetric and non-negative.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch { op: "normalize_adjacency", lhs: vec![a.rows(), a.cols()], rhs: vec![] });
    }
    if !a.is_symmetric() {
        return Err(Error::Usage("adjacency matrix is not symmetric".into()));
    }
    if let Some((r, c, v)) = a.triplets().find(|t| !(t.2 >= 0.0) || !t.2.is_finite()) {
        return Err(Error::Usage(format!("adjacency weight {v} at ({r}, {c}) is negative or non-finite")));
    }
    let n = a.rows();
    let mut triplets: Vec<(usize, usize, f64)> = a.triplets().collect();
    triplets.extend((0..n).map(|i| (i, i, 1.0)));
    let with_loops = SparseMatrix::from_triplets(n, n, triplets)?;
    let degree: Vec<f64> = (0..n).map(|i| with_loops.row(i).map(|(_, v)| v).sum::<f64>()).collect();
    let scaled = with_loops.triplets().map(|(r, c, v)| (r, c, v / libm::sqrt(degree[r] * degree[c]))).collect();
    SparseMatrix::from_triplets(n, n, scaled)
}

impl TextGraph {
    /// Builds the graph over `sentences` (one document each). `doc_names`
    /// label the document nodes and must be unique.
    pub fn build<S: AsRef<str>, N: AsRef<str>>(doc_names: &[N], sentences: &[S], config: GraphConfig) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Usage("text graph needs at least one document".into()));
        }
        if doc_names.len() != sentences.len() {
            return Err(Error::Usage(format!("{} document names for {} sentences", doc_names.len(), sentences.len())));
        }
        if config.window == 0 {
            return Err(Error::Usage("window must be positive".into()));
        }
        let tokenized: Vec<Vec<String>> = sentences.iter().map(|s| graph_tokens(s.as_ref())).collect();
        let mut corpus_count: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokenized.iter().flatten() {
            *corpus_count.entry(t.as_str()).or_insert(0) += 1;
        }
        let words: Vec<String> = corpus_count
            .iter()
            .filter(|(_, c)| **c >= config.min_word_count)
            .map(|(w, _)| String::from(*w))
            .collect();
        if words.is_empty() {
            return Err(Error::Data(format!(
                "empty vocabulary after dropping words seen fewer than {} times",
                config.min_word_count
            )));
        }
        let word_index: BTreeMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let docs: Vec<Vec<usize>> = tokenized
            .iter()
            .map(|toks| toks.iter().filter_map(|t| word_index.get(t).copied()).collect())
            .collect();

        let n_docs = docs.len();
        let n_words = words.len();
        let mut triplets = Vec::new();

        // Word-word PMI over sliding windows.
        let mut window_freq = vec![0usize; n_words];
        let mut pair_freq: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut n_windows = 0usize;
        for doc in &docs {
            if doc.is_empty() {
                continue;
            }
            let spans: Vec<&[usize]> =
                if doc.len() <= config.window { vec![doc.as_slice()] } else { doc.windows(config.window).collect() };
            for w in spans {
                n_windows += 1;
                let unique: BTreeSet<usize> = w.iter().copied().collect();
                let unique: Vec<usize> = unique.into_iter().collect();
                for (a, &i) in unique.iter().enumerate() {
                    window_freq[i] += 1;
                    for &j in &unique[a + 1..] {
                        *pair_freq.entry((i, j)).or_insert(0) += 1;
                    }
                }
            }
        }
        let total = n_windows as f64;
        for (&(i, j), &c) in &pair_freq {
            let pmi = libm::log(c as f64 * total / (window_freq[i] as f64 * window_freq[j] as f64));
            if pmi > 0.0 {
                triplets.push((n_docs + i, n_docs + j, pmi));
                triplets.push((n_docs + j, n_docs + i, pmi));
            }
        }

        // Document-word TF-IDF.
        let mut doc_freq = vec![0usize; n_words];
        let mut term_counts = Vec::with_capacity(n_docs);
        for doc in &docs {
            let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
            for &w in doc {
                *tf.entry(w).or_insert(0) += 1;
            }
            for &w in tf.keys() {
                doc_freq[w] += 1;
            }
            term_counts.push(tf);
        }
        for (d, tf) in term_counts.iter().enumerate() {
            for (&w, &c) in tf {
                let weight = c as f64 * smoothed_idf(n_docs, doc_freq[w]);
                triplets.push((d, n_docs + w, weight));
                triplets.push((n_docs + w, d, weight));
            }
        }

        let n = n_docs + n_words;
        let adjacency = SparseMatrix::from_triplets(n, n, triplets)?;
        let names = doc_names.iter().map(|s| String::from(s.as_ref())).collect();
        Self::from_adjacency(names, words, adjacency)
    }

    /// Reassembles a graph from its node names and raw adjacency (for
    /// example after reading a dump), recomputing `Â`.
    pub fn from_adjacency(doc_names: Vec<String>, words: Vec<String>, adjacency: SparseMatrix) -> Result<Self> {
        let n = doc_names.len() + words.len();
        if adjacency.rows() != n {
            return Err(Error::ShapeMismatch { op: "text graph", lhs: vec![adjacency.rows()], rhs: vec![n] });
        }
        let unique: BTreeSet<&String> = doc_names.iter().collect();
        if unique.len() != doc_names.len() {
            return Err(Error::Data("duplicate document names in text graph".into()));
        }
        let normalized = Arc::new(normalize_adjacency(&adjacency)?);
        let word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(TextGraph { doc_names, words, word_index, adjacency, normalized })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_names.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_docs() + self.n_words()
    }

    pub fn doc_names(&self) -> &[String] {
        &self.doc_names
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_node(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).map(|i| self.n_docs() + i)
    }

    pub fn doc_node(&self, name: &str) -> Option<usize> {
        self.doc_names.iter().position(|d| d == name)
    }

    /// Doc-name → node index map, for batch lookups.
    pub fn doc_index(&self) -> BTreeMap<&str, usize> {
        self.doc_names.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect()
    }

    /// Raw adjacency without self-loops.
    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn normalized(&self) -> &SparseMatrix {
        &self.normalized
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnConfig {
    pub hidden: usize,
    pub output: usize,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig { hidden: 512, output: 256 }
    }
}

/// Two graph-convolution weight matrices, `W1: [F, hidden]` and
/// `W2: [hidden, output]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcnLayers {
    pub config: GcnConfig,
    pub input_dim: usize,
    w1: ParamId,
    w2: ParamId,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    Tensor::uniform(&[rows, cols], bound, rng)
}

impl GcnLayers {
    /// `input_dim` is the node-feature width; with one-hot node features it
    /// equals the node count.
    pub fn new(params: &mut ParamSet, name: &str, input_dim: usize, config: GcnConfig, rng: &mut impl Rng) -> Result<Self> {
        if input_dim == 0 || config.hidden == 0 || config.output == 0 {
            return Err(Error::Usage("GCN widths must be positive".into()));
        }
        let w1 = params.add(join(name, "w1"), glorot(input_dim, config.hidden, rng))?;
        let w2 = params.add(join(name, "w2"), glorot(config.hidden, config.output, rng))?;
        Ok(GcnLayers { config, input_dim, w1, w2 })
    }

    /// `X·W1`, or `W1` itself for one-hot node features (`X = I`).
    fn project(&self, tape: &mut Tape, graph: &TextGraph, w1: Var, features: Option<Var>) -> Result<Var> {
        match features {
            Some(x) => {
                if tape.shape(x).first() != Some(&graph.n_nodes()) {
                    return Err(Error::ShapeMismatch {
                        op: "gcn features",
                        lhs: tape.shape(x).to_vec(),
                        rhs: vec![graph.n_nodes(), self.input_dim],
                    });
                }
                tape.matmul(x, w1)
            }
            None => {
                if self.input_dim != graph.n_nodes() {
                    return Err(Error::ShapeMismatch {
                        op: "gcn one-hot features",
                        lhs: vec![graph.n_nodes(), graph.n_nodes()],
                        rhs: vec![self.input_dim, self.config.hidden],
                    });
                }
                Ok(w1)
            }
        }
    }

    /// Places both weight matrices on the tape.
    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> (Var, Var) {
        (tape.param(params, self.w1), tape.param(params, self.w2))
    }

    /// `Â·relu(Â·X·W1)·W2` restricted to the requested node rows. Only the
    /// first-layer rows those outputs read from are computed.
    pub fn forward_rows(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        graph: &TextGraph,
        features: Option<Var>,
        rows: &[usize],
    ) -> Result<Var> {
        let weights = self.bind(tape, params);
        self.forward_rows_bound(tape, weights, graph, features, rows)
    }

    pub fn forward_rows_bound(
        &self,
        tape: &mut Tape,
        (w1, w2): (Var, Var),
        graph: &TextGraph,
        features: Option<Var>,
        rows: &[usize],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Usage("gcn forward over zero rows".into()));
        }
        let a_hat = graph.normalized();
        if let Some(&r) = rows.iter().find(|&&r| r >= a_hat.rows()) {
            return Err(Error::Usage(format!("node {r} outside graph with {} nodes", a_hat.rows())));
        }
        let needed: Vec<usize> =
            rows.iter().flat_map(|&r| a_hat.row(r).map(|(c, _)| c)).collect::<BTreeSet<_>>().into_iter().collect();
        let xw = self.project(tape, graph, w1, features)?;
        let first = Arc::new(a_hat.select_rows(&needed)?);
        let h1 = tape.spmm(first, xw)?;
        let h1 = tape.relu(h1);
        let second = Arc::new(a_hat.select(rows, &needed)?);
        let h2 = tape.spmm(second, h1)?;
        tape.matmul(h2, w2)
    }

    /// Embeddings of every document node, `[n_docs, output]`.
    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, graph: &TextGraph, features: Option<Var>) -> Result<Var> {
        let docs: Vec<usize> = (0..graph.n_docs()).collect();
        self.forward_rows(tape, params, graph, features, &docs)
    }
}

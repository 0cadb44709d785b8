//! Run configuration: flat `section.key = value` text, every key also
//! settable from the command line.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lcp_core::dataset::OovPolicy;
use lcp_core::features::DEFAULT_MAX_FEATURES;
use lcp_core::model::ModelConfig;
use sha2::{Digest, Sha256};

use crate::error::{usage, LcpError, Result};

/// Which regressor `train` fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Nn,
    Ridge,
    Logistic,
    Ensemble,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nn => "nn",
            ModelKind::Ridge => "ridge",
            ModelKind::Logistic => "logistic",
            ModelKind::Ensemble => "ensemble",
        }
    }
}

impl FromStr for ModelKind {
    type Err = LcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(ModelKind::Nn),
            "ridge" => Ok(ModelKind::Ridge),
            "logistic" => Ok(ModelKind::Logistic),
            "ensemble" => Ok(ModelKind::Ensemble),
            _ => Err(usage(format!("unknown model kind {s:?} (nn, ridge, logistic, ensemble)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub trial: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    /// One or more files, merged.
    pub context_vectors: Vec<PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    /// Optional TSV of precomputed per-entry indices.
    pub annotations: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub use_ngrams: bool,
    pub ngram_range: (usize, usize),
    pub max_features: usize,
    /// Coverage threshold applied to annotation columns.
    pub min_coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSettings {
    pub lambda_grid: Vec<f64>,
    /// Used when there is no trial split to select on.
    pub lambda: f64,
    pub standardize: bool,
    pub ensemble_k: usize,
    pub use_word: bool,
    pub use_context: bool,
    pub use_handcrafted: bool,
    pub logistic_lr: f64,
    pub logistic_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub kind: ModelKind,
    pub paths: Paths,
    pub oov: OovPolicy,
    pub features: FeatureSettings,
    /// `model.seed` mirrors `seed`.
    pub model: ModelConfig,
    pub baseline: BaselineSettings,
    pub worst_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            kind: ModelKind::Nn,
            paths: Paths { out_dir: PathBuf::from("out"), ..Paths::default() },
            oov: OovPolicy::Zeros,
            features: FeatureSettings { use_ngrams: true, ngram_range: (2, 4), max_features: DEFAULT_MAX_FEATURES, min_coverage: 0.5 },
            model: ModelConfig::default(),
            baseline: BaselineSettings {
                lambda_grid: lcp_core::baselines::DEFAULT_LAMBDA_GRID.to_vec(),
                lambda: 1.0,
                standardize: true,
                ensemble_k: 5,
                use_word: true,
                use_context: true,
                use_handcrafted: true,
                logistic_lr: 0.5,
                logistic_epochs: 2000,
            },
            worst_k: 20,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| usage(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(usage(format!("bad value {value:?} for {key}, expected true or false"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// The key excluded from the configuration hash.
pub const OUT_DIR_KEY: &str = "paths.out_dir";

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let m = &mut self.model;
        let b = &mut self.baseline;
        match key {
            "run.seed" => self.seed = parse(key, v)?,
            "run.kind" => self.kind = v.parse()?,
            "paths.train" => self.paths.train = opt_path(v),
            "paths.trial" => self.paths.trial = opt_path(v),
            "paths.test" => self.paths.test = opt_path(v),
            "paths.word_vectors" => self.paths.word_vectors = opt_path(v),
            "paths.context_vectors" => {
                self.paths.context_vectors = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
            }
            "paths.lexicon_dir" => self.paths.lexicon_dir = opt_path(v),
            "paths.annotations" => self.paths.annotations = opt_path(v),
            "paths.out_dir" => self.paths.out_dir = opt_path(v).ok_or_else(|| usage("paths.out_dir cannot be empty"))?,
            "data.oov" => {
                self.oov = match v {
                    "zeros" => OovPolicy::Zeros,
                    "mean" => OovPolicy::MeanVector,
                    _ => return Err(usage(format!("bad value {v:?} for data.oov, expected zeros or mean"))),
                }
            }
            "features.use_ngrams" => self.features.use_ngrams = parse_bool(key, v)?,
            "features.ngram_min" => self.features.ngram_range.0 = parse(key, v)?,
            "features.ngram_max" => self.features.ngram_range.1 = parse(key, v)?,
            "features.max_features" => self.features.max_features = parse(key, v)?,
            "features.min_coverage" => self.features.min_coverage = parse(key, v)?,
            "model.use_char_bilstm" => m.use_char_bilstm = parse_bool(key, v)?,
            "model.use_gcn" => m.use_gcn = parse_bool(key, v)?,
            "model.use_capsule" => m.use_capsule = parse_bool(key, v)?,
            "model.use_handcrafted" => m.use_handcrafted = parse_bool(key, v)?,
            "model.use_adversarial" => m.use_adversarial = parse_bool(key, v)?,
            "model.word_dim" => m.word_dim = parse(key, v)?,
            "model.context_dim" => m.context_dim = parse(key, v)?,
            "model.hidden1" => m.hidden1 = parse(key, v)?,
            "model.hidden2" => m.hidden2 = parse(key, v)?,
            "model.dropout" => m.dropout = parse(key, v)?,
            "model.epochs" => m.epochs = parse(key, v)?,
            "model.batch_size" => m.batch_size = parse(key, v)?,
            "model.lr" => m.lr = parse(key, v)?,
            "model.weight_decay" => m.weight_decay = parse(key, v)?,
            "model.epsilon" => m.epsilon = parse(key, v)?,
            "bilstm.char_dim" => m.bilstm.char_dim = parse(key, v)?,
            "bilstm.hidden" => m.bilstm.hidden = parse(key, v)?,
            "graph.window" => m.graph.window = parse(key, v)?,
            "graph.min_word_count" => m.graph.min_word_count = parse(key, v)?,
            "gcn.hidden" => m.gcn.hidden = parse(key, v)?,
            "gcn.output" => m.gcn.output = parse(key, v)?,
            "capsule.n_in" => m.capsule.n_in = parse(key, v)?,
            "capsule.d_in" => m.capsule.d_in = parse(key, v)?,
            "capsule.n_out" => m.capsule.n_out = parse(key, v)?,
            "capsule.d_out" => m.capsule.d_out = parse(key, v)?,
            "capsule.routings" => m.capsule.routings = parse(key, v)?,
            "baseline.lambda_grid" => {
                b.lambda_grid = v.split(',').map(|x| parse(key, x.trim())).collect::<Result<_>>()?;
            }
            "baseline.lambda" => b.lambda = parse(key, v)?,
            "baseline.standardize" => b.standardize = parse_bool(key, v)?,
            "baseline.ensemble_k" => b.ensemble_k = parse(key, v)?,
            "baseline.use_word" => b.use_word = parse_bool(key, v)?,
            "baseline.use_context" => b.use_context = parse_bool(key, v)?,
            "baseline.use_handcrafted" => b.use_handcrafted = parse_bool(key, v)?,
            "baseline.logistic_lr" => b.logistic_lr = parse(key, v)?,
            "baseline.logistic_epochs" => b.logistic_epochs = parse(key, v)?,
            "eval.worst_k" => self.worst_k = parse(key, v)?,
            _ => return Err(usage(format!("unknown configuration key {key:?}"))),
        }
        self.model.seed = self.seed;
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order. Feeding these
    /// back through [`RunConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let b = &self.baseline;
        let f = &self.features;
        vec![
            ("run.seed", self.seed.to_string()),
            ("run.kind", self.kind.as_str().to_string()),
            ("paths.train", show_path(&self.paths.train)),
            ("paths.trial", show_path(&self.paths.trial)),
            ("paths.test", show_path(&self.paths.test)),
            ("paths.word_vectors", show_path(&self.paths.word_vectors)),
            ("paths.context_vectors", self.paths.context_vectors.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")),
            ("paths.lexicon_dir", show_path(&self.paths.lexicon_dir)),
            ("paths.annotations", show_path(&self.paths.annotations)),
            (OUT_DIR_KEY, self.paths.out_dir.display().to_string()),
            ("data.oov", if self.oov == OovPolicy::Zeros { "zeros" } else { "mean" }.to_string()),
            ("features.use_ngrams", f.use_ngrams.to_string()),
            ("features.ngram_min", f.ngram_range.0.to_string()),
            ("features.ngram_max", f.ngram_range.1.to_string()),
            ("features.max_features", f.max_features.to_string()),
            ("features.min_coverage", f.min_coverage.to_string()),
            ("model.use_char_bilstm", m.use_char_bilstm.to_string()),
            ("model.use_gcn", m.use_gcn.to_string()),
            ("model.use_capsule", m.use_capsule.to_string()),
            ("model.use_handcrafted", m.use_handcrafted.to_string()),
            ("model.use_adversarial", m.use_adversarial.to_string()),
            ("model.word_dim", m.word_dim.to_string()),
            ("model.context_dim", m.context_dim.to_string()),
            ("model.hidden1", m.hidden1.to_string()),
            ("model.hidden2", m.hidden2.to_string()),
            ("model.dropout", m.dropout.to_string()),
            ("model.epochs", m.epochs.to_string()),
            ("model.batch_size", m.batch_size.to_string()),
            ("model.lr", m.lr.to_string()),
            ("model.weight_decay", m.weight_decay.to_string()),
            ("model.epsilon", m.epsilon.to_string()),
            ("bilstm.char_dim", m.bilstm.char_dim.to_string()),
            ("bilstm.hidden", m.bilstm.hidden.to_string()),
            ("graph.window", m.graph.window.to_string()),
            ("graph.min_word_count", m.graph.min_word_count.to_string()),
            ("gcn.hidden", m.gcn.hidden.to_string()),
            ("gcn.output", m.gcn.output.to_string()),
            ("capsule.n_in", m.capsule.n_in.to_string()),
            ("capsule.d_in", m.capsule.d_in.to_string()),
            ("capsule.n_out", m.capsule.n_out.to_string()),
            ("capsule.d_out", m.capsule.d_out.to_string()),
            ("capsule.routings", m.capsule.routings.to_string()),
            ("baseline.lambda_grid", join(&b.lambda_grid)),
            ("baseline.lambda", b.lambda.to_string()),
            ("baseline.standardize", b.standardize.to_string()),
            ("baseline.ensemble_k", b.ensemble_k.to_string()),
            ("baseline.use_word", b.use_word.to_string()),
            ("baseline.use_context", b.use_context.to_string()),
            ("baseline.use_handcrafted", b.use_handcrafted.to_string()),
            ("baseline.logistic_lr", b.logistic_lr.to_string()),
            ("baseline.logistic_epochs", b.logistic_epochs.to_string()),
            ("eval.worst_k", self.worst_k.to_string()),
        ]
    }

    /// Applies a config file's settings. Blank lines and `#` comments are
    /// skipped; a key may appear once.
    pub fn apply_text(&mut self, path: &Path, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| LcpError::parse(path, i + 1, "expected `key = value`"))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(LcpError::parse(path, i + 1, format!("{key} set twice")));
            }
            self.set(key, value).map_err(|e| LcpError::parse(path, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Defaults, then the config file, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| LcpError::io(path, e))?;
            cfg.apply_text(path, &text).map_err(|e| match e {
                LcpError::Parse { .. } => LcpError::Usage(e.to_string()),
                other => other,
            })?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Config file text for [`RunConfig::entries`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 over every resolved setting except the output directory, so
    /// reruns into a different directory share a hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().into_iter().filter(|(k, _)| *k != OUT_DIR_KEY) {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let (lo, hi) = self.features.ngram_range;
        if lo == 0 || lo > hi {
            return Err(usage(format!("n-gram range ({lo}, {hi}) is invalid")));
        }
        if !(0.0..=1.0).contains(&self.features.min_coverage) {
            return Err(usage("features.min_coverage must lie in [0, 1]"));
        }
        if self.baseline.lambda_grid.is_empty() || self.baseline.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(usage("baseline.lambda_grid needs non-negative values"));
        }
        if self.baseline.ensemble_k == 0 {
            return Err(usage("baseline.ensemble_k must be at least 1"));
        }
        Ok(())
    }

    /// Fails when a configured input path does not exist.
    pub fn check_paths(&self) -> Result<()> {
        let p = &self.paths;
        let named = [
            ("paths.train", p.train.as_ref()),
            ("paths.trial", p.trial.as_ref()),
            ("paths.test", p.test.as_ref()),
            ("paths.word_vectors", p.word_vectors.as_ref()),
            ("paths.lexicon_dir", p.lexicon_dir.as_ref()),
            ("paths.annotations", p.annotations.as_ref()),
        ];
        let contexts = p.context_vectors.iter().map(|c| ("paths.context_vectors", Some(c)));
        for (key, path) in named.into_iter().chain(contexts) {
            if let Some(path) = path.filter(|p| !p.exists()) {
                return Err(LcpError::Data(format!("{key}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn split_path(&self, split: &str) -> Result<&Path> {
        let p = match split {
            "train" => &self.paths.train,
            "trial" => &self.paths.trial,
            "test" => &self.paths.test,
            _ => return Err(usage(format!("unknown split {split:?} (train, trial, test)"))),
        };
        p.as_deref().ok_or_else(|| usage(format!("paths.{split} is not set")))
    }
}

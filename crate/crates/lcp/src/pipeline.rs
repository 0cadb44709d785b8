//! The command implementations behind the CLI. Each takes a resolved
//! [`RunConfig`] and writes its artifacts under `paths.out_dir`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lcp_core::baselines::{
    ensemble_predict, fit_bootstrap_ridge, select_lambda, LogisticConfig, LogisticModel, Regressor, RidgeConfig, RidgeModel,
};
use lcp_core::dataset::{target_word_embedding, ContextVectorTable, Entry, WordVectorTable};
use lcp_core::features::{coverage_filter, handcrafted_block, FeatureBlock, LexiconResource, NgramVectorizer};
use lcp_core::graph::TextGraph;
use lcp_core::linalg::Matrix;
use lcp_core::metrics::{build_report, EvalReport};
use lcp_core::model::{assemble_examples, assemble_examples_lenient, train, FeatureSources, History, Model};
use lcp_core::nn::{ParamSet, Tensor};
use serde_json::Value;

use crate::config::{ModelKind, RunConfig};
use crate::error::{data, usage, LcpError, Result};
use crate::io::{self, Annotations, Checkpoint, Dataset};
use crate::report;

pub const SPLITS: [&str; 3] = ["train", "trial", "test"];

/// File names inside a model directory.
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const VECTORIZER_FILE: &str = "vectorizer.txt";
pub const GRAPH_FILE: &str = "graph.txt";

const STD_MEAN: &str = "standardization.mean";
const STD_DEV: &str = "standardization.std";

/// Header echoed by every command: seed, hash and the resolved settings.
pub fn echo(cfg: &RunConfig) -> String {
    format!("# seed = {}\n# config_hash = {}\n{}", cfg.seed, cfg.hash(), cfg.to_text())
}

fn provenance(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![("config_hash", cfg.hash()), ("seed", cfg.seed.to_string())]
}

fn write_with_sidecar(cfg: &RunConfig, path: &Path, text: &str) -> Result<()> {
    io::write_text(path, text)?;
    io::write_sidecar(path, &provenance(cfg))
}

/// Default model directory of a run.
pub fn model_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.out_dir.join("model")
}

fn load_split(cfg: &RunConfig, split: &str) -> Result<Option<Dataset>> {
    let Ok(path) = cfg.split_path(split) else { return Ok(None) };
    let d = io::load_dataset(path)?;
    if !d.rejects.is_empty() {
        log::warn!("{split}: {} rows rejected (see `lcp ingest`)", d.rejects.len());
    }
    log::info!("{split}: {} entries from {}", d.entries.len(), path.display());
    Ok(Some(d))
}

fn require_labeled(d: &Dataset, what: &str) -> Result<()> {
    match d.labeled {
        true => Ok(()),
        false => Err(data(format!("{what} split has no complexity column"))),
    }
}

fn ids(entries: &[Entry]) -> Vec<String> {
    entries.iter().map(|e| e.id.clone()).collect()
}

fn golds(entries: &[Entry]) -> Vec<f64> {
    entries.iter().map(|e| e.gold.unwrap_or(f64::NAN)).collect()
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    /// `(split, accepted, rejected)`.
    pub splits: Vec<(String, usize, usize)>,
}

/// Parses every configured split and writes the normalized dataset and its
/// rejects list to `ingest/`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    cfg.check_paths()?;
    let dir = cfg.paths.out_dir.join("ingest");
    let mut splits = Vec::new();
    for split in SPLITS {
        let Some(d) = load_split(cfg, split)? else { continue };
        write_with_sidecar(cfg, &dir.join(format!("{split}.tsv")), &io::format_dataset(&d.entries))?;
        write_with_sidecar(cfg, &dir.join(format!("{split}.rejects.tsv")), &io::format_rejects(&d.rejects))?;
        splits.push((split.to_string(), d.entries.len(), d.rejects.len()));
    }
    if splits.is_empty() {
        return Err(usage("no dataset split configured (paths.train, paths.trial, paths.test)"));
    }
    Ok(IngestSummary { splits })
}

/// Fitted state of the hand-crafted battery.
#[derive(Debug, Clone)]
pub struct FeatureState {
    pub resources: Vec<LexiconResource>,
    pub vectorizer: Option<NgramVectorizer>,
    pub annotations: Option<Annotations>,
    /// Final column order, after annotation coverage filtering.
    pub columns: Vec<String>,
}

fn raw_block(entries: &[Entry], resources: &[LexiconResource], vectorizer: Option<&NgramVectorizer>, ann: Option<&Annotations>) -> Result<FeatureBlock> {
    let base = handcrafted_block(entries, resources, vectorizer)?;
    match ann {
        Some(a) => {
            let ab = a.block(&entries.iter().map(|e| e.id.as_str()).collect::<Vec<_>>())?;
            Ok(FeatureBlock::hconcat("handcrafted", &[&base, &ab])?)
        }
        None => Ok(base),
    }
}

impl FeatureState {
    /// Loads lexicons, fits the n-gram vectorizer on training targets and
    /// picks the annotation columns that pass the coverage threshold on the
    /// training entries.
    pub fn fit(cfg: &RunConfig, train: &[Entry]) -> Result<Self> {
        if train.is_empty() {
            return Err(data("training split has no entries"));
        }
        let resources = io::load_lexicon_dir(cfg.paths.lexicon_dir.as_deref())?;
        let vectorizer = match cfg.features.use_ngrams {
            true => {
                let targets: Vec<&str> = train.iter().map(|e| e.target.as_str()).collect();
                Some(NgramVectorizer::fit(cfg.features.ngram_range, cfg.features.max_features, &targets)?)
            }
            false => None,
        };
        let annotations = cfg.paths.annotations.as_deref().map(Annotations::load).transpose()?;
        let mut columns = handcrafted_block(&train[..1], &resources, vectorizer.as_ref())?.column_names().to_vec();
        if let Some(a) = &annotations {
            let block = a.block(&train.iter().map(|e| e.id.as_str()).collect::<Vec<_>>())?;
            let (_, kept) = coverage_filter(&block, cfg.features.min_coverage)?;
            log::info!("annotations: kept {} of {} columns at coverage {}", kept.len(), block.cols(), cfg.features.min_coverage);
            columns.extend(kept);
        }
        Ok(FeatureState { resources, vectorizer, annotations, columns })
    }

    /// The battery for `entries`, restricted to [`FeatureState::columns`].
    pub fn block(&self, entries: &[Entry]) -> Result<FeatureBlock> {
        let full = raw_block(entries, &self.resources, self.vectorizer.as_ref(), self.annotations.as_ref())?;
        let index: BTreeMap<&str, usize> = full.column_names().iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let keep = self
            .columns
            .iter()
            .map(|c| index.get(c.as_str()).copied().ok_or_else(|| data(format!("feature column {c:?} cannot be computed from the given inputs"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(full.select(&keep))
    }
}

#[derive(Debug, Clone)]
pub struct FeaturesSummary {
    pub columns: usize,
    pub rows: Vec<(String, usize)>,
}

/// Writes `features/<split>.tsv` for every configured split and the fitted
/// vectorizer.
pub fn cmd_features(cfg: &RunConfig) -> Result<FeaturesSummary> {
    cfg.validate()?;
    cfg.check_paths()?;
    let train = load_split(cfg, "train")?.ok_or_else(|| usage("features needs paths.train"))?;
    let state = FeatureState::fit(cfg, &train.entries)?;
    let dir = cfg.paths.out_dir.join("features");
    let mut rows = Vec::new();
    for split in SPLITS {
        let d = match split {
            "train" => Some(train.clone()),
            _ => load_split(cfg, split)?,
        };
        let Some(d) = d else { continue };
        let block = state.block(&d.entries)?;
        write_with_sidecar(cfg, &dir.join(format!("{split}.tsv")), &io::format_features(&ids(&d.entries), &block))?;
        rows.push((split.to_string(), block.rows()));
    }
    if let Some(v) = &state.vectorizer {
        write_with_sidecar(cfg, &dir.join(VECTORIZER_FILE), &io::format_vectorizer(v))?;
    }
    Ok(FeaturesSummary { columns: state.columns.len(), rows })
}

fn load_words(cfg: &RunConfig, dim: usize) -> Result<WordVectorTable> {
    let path = cfg.paths.word_vectors.as_deref().ok_or_else(|| usage("paths.word_vectors is not set"))?;
    let w = io::load_word_vectors(path, dim, cfg.oov)?;
    log::info!("word vectors: {} tokens, {} duplicates, {} rejected lines", w.table.len(), w.duplicates, w.rejected.len());
    Ok(w.table)
}

fn load_contexts(cfg: &RunConfig, dim: usize) -> Result<ContextVectorTable> {
    if cfg.paths.context_vectors.is_empty() {
        return Err(usage("paths.context_vectors is not set"));
    }
    io::load_context_files(&cfg.paths.context_vectors, dim)
}

/// Inputs of the classical regressors, loaded once per command.
struct BaselineInputs {
    words: Option<WordVectorTable>,
    contexts: Option<ContextVectorTable>,
}

impl BaselineInputs {
    fn load(cfg: &RunConfig, settings: &RunConfig) -> Result<Self> {
        let b = &settings.baseline;
        Ok(BaselineInputs {
            words: b.use_word.then(|| load_words(cfg, settings.model.word_dim)).transpose()?,
            contexts: b.use_context.then(|| load_contexts(cfg, settings.model.context_dim)).transpose()?,
        })
    }

    /// One feature row per entry, or the reason it cannot be built.
    fn rows(&self, entries: &[Entry], hc: Option<&FeatureBlock>) -> Vec<std::result::Result<Vec<f64>, String>> {
        entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut row = Vec::new();
                if let Some(w) = &self.words {
                    row.extend(target_word_embedding(e, w));
                }
                if let Some(c) = &self.contexts {
                    row.extend_from_slice(c.get(&e.id).ok_or_else(|| "missing context vector".to_string())?);
                }
                if let Some(h) = hc {
                    row.extend_from_slice(h.row(i));
                }
                Ok(row)
            })
            .collect()
    }

    fn matrix(&self, entries: &[Entry], hc: Option<&FeatureBlock>) -> Result<Matrix> {
        let rows = self.rows(entries, hc);
        let missing: Vec<String> = rows.iter().zip(entries).filter(|(r, _)| r.is_err()).map(|(_, e)| e.id.clone()).collect();
        if !missing.is_empty() {
            return Err(lcp_core::Error::MissingContext(missing).into());
        }
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.expect("checked above")).collect();
        if rows.first().map_or(true, Vec::is_empty) {
            return Err(usage("every baseline feature block is switched off"));
        }
        Ok(Matrix::from_rows(&rows)?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub model_dir: PathBuf,
    pub history: Option<History>,
    /// Lambda grid scores, for the ridge-based kinds with a trial split.
    pub lambda_scores: Vec<(f64, Option<f64>)>,
    pub lambda: Option<f64>,
}

fn base_checkpoint(cfg: &RunConfig, state: &FeatureState) -> Checkpoint {
    let mut ck = Checkpoint::default();
    ck.meta.insert("kind".into(), cfg.kind.as_str().into());
    ck.meta.insert("config_hash".into(), cfg.hash());
    ck.meta.insert("seed".into(), cfg.seed.to_string());
    ck.config = cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ck.columns = state.columns.clone();
    ck
}

/// Fits the configured model and writes the model directory (checkpoint,
/// vectorizer, graph) plus the training history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    cfg.check_paths()?;
    let train_set = load_split(cfg, "train")?.ok_or_else(|| usage("train needs paths.train"))?;
    require_labeled(&train_set, "train")?;
    let trial_set = load_split(cfg, "trial")?;
    if let Some(t) = &trial_set {
        require_labeled(t, "trial")?;
    }
    let state = FeatureState::fit(cfg, &train_set.entries)?;
    let dir = model_dir(cfg);
    if let Some(v) = &state.vectorizer {
        io::save_vectorizer(&dir.join(VECTORIZER_FILE), v)?;
    }
    let trial = trial_set.as_ref().map(|t| t.entries.as_slice()).filter(|t| !t.is_empty());
    let mut summary = match cfg.kind {
        ModelKind::Nn => train_nn(cfg, &state, &train_set.entries, trial, &dir)?,
        _ => train_baseline(cfg, &state, &train_set.entries, trial, &dir)?,
    };
    summary.model_dir = dir;
    Ok(summary)
}

fn train_nn(cfg: &RunConfig, state: &FeatureState, train_e: &[Entry], trial_e: Option<&[Entry]>, dir: &Path) -> Result<TrainSummary> {
    let words = load_words(cfg, cfg.model.word_dim)?;
    let contexts = load_contexts(cfg, cfg.model.context_dim)?;
    let graph = match cfg.model.use_gcn {
        true => {
            let test = load_split(cfg, "test")?;
            let mut docs: Vec<&Entry> = train_e.iter().collect();
            docs.extend(trial_e.unwrap_or_default());
            if let Some(t) = &test {
                docs.extend(&t.entries);
            }
            let names: Vec<&str> = docs.iter().map(|e| e.id.as_str()).collect();
            let sentences: Vec<&str> = docs.iter().map(|e| e.sentence.as_str()).collect();
            let g = TextGraph::build(&names, &sentences, cfg.model.graph)?;
            log::info!("text graph: {} documents, {} words", g.n_docs(), g.n_words());
            io::save_graph(&dir.join(GRAPH_FILE), &g)?;
            Some(g)
        }
        false => None,
    };
    let examples = |entries: &[Entry]| -> Result<_> {
        let hc = state.block(entries)?;
        let src = FeatureSources { words: &words, contexts: &contexts, graph: graph.as_ref(), handcrafted: Some(&hc) };
        Ok(assemble_examples(entries, &src, &cfg.model)?)
    };
    let train_x = examples(train_e)?;
    let trial_x = trial_e.map(examples).transpose()?;
    let mut model = Model::new(cfg.model, state.columns.len(), graph)?;
    let history = train(&mut model, &train_x, trial_x.as_deref())?;

    let mut ck = base_checkpoint(cfg, state);
    ck.meta.insert("best_epoch".into(), history.best_epoch.to_string());
    ck.params = model.params.clone();
    let (mean, std) = model.standardization();
    ck.params.add(STD_MEAN, Tensor::vector(mean.to_vec()))?;
    ck.params.add(STD_DEV, Tensor::vector(std.to_vec()))?;
    ck.save(&dir.join(CHECKPOINT_FILE))?;

    let mut text = String::from("epoch\ttrain_loss\ttrial_pearson\ttrial_mae\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &history.epochs {
        let _ = writeln!(text, "{}\t{}\t{}\t{}", r.epoch, r.train_loss, opt(r.trial_pearson), opt(r.trial_mae));
    }
    write_with_sidecar(cfg, &cfg.paths.out_dir.join("history.tsv"), &text)?;
    Ok(TrainSummary { kind: cfg.kind, model_dir: dir.to_path_buf(), history: Some(history), lambda_scores: Vec::new(), lambda: None })
}

/// Column means and deviations; constant columns keep a unit deviation.
fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let mean = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, if var > 1e-24 { var.sqrt() } else { 1.0 })
        })
        .unzip()
}

fn standardize(x: &Matrix, mean: &[f64], std: &[f64]) -> Result<Matrix> {
    let data = x.data().chunks(x.cols()).flat_map(|r| r.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s)).collect();
    Ok(Matrix::new(x.rows(), x.cols(), data)?)
}

fn train_baseline(cfg: &RunConfig, state: &FeatureState, train_e: &[Entry], trial_e: Option<&[Entry]>, dir: &Path) -> Result<TrainSummary> {
    let b = &cfg.baseline;
    let inputs = BaselineInputs::load(cfg, cfg)?;
    let hc_of = |entries: &[Entry]| -> Result<Option<FeatureBlock>> { b.use_handcrafted.then(|| state.block(entries)).transpose() };
    let x = inputs.matrix(train_e, hc_of(train_e)?.as_ref())?;
    let y = golds(train_e);
    let trial = match trial_e {
        Some(t) => Some((inputs.matrix(t, hc_of(t)?.as_ref())?, golds(t))),
        None => None,
    };
    let mut ck = base_checkpoint(cfg, state);
    let mut summary = TrainSummary { kind: cfg.kind, model_dir: dir.to_path_buf(), history: None, lambda_scores: Vec::new(), lambda: None };
    let ridge = |summary: &mut TrainSummary| -> Result<RidgeModel> {
        match &trial {
            Some((xt, yt)) => {
                let (m, scores) = select_lambda(&x, &y, xt, yt, &b.lambda_grid, b.standardize)?;
                summary.lambda_scores = scores;
                Ok(m)
            }
            None => Ok(RidgeModel::fit(&x, &y, RidgeConfig { lambda: b.lambda, standardize: b.standardize })?),
        }
    };
    match cfg.kind {
        ModelKind::Ridge => {
            let m = ridge(&mut summary)?;
            summary.lambda = Some(m.lambda);
            ck.params = m.to_params()?;
        }
        ModelKind::Ensemble => {
            let lambda = ridge(&mut summary)?.lambda;
            summary.lambda = Some(lambda);
            let members = fit_bootstrap_ridge(&x, &y, RidgeConfig { lambda, standardize: b.standardize }, b.ensemble_k, cfg.seed)?;
            ck.meta.insert("members".into(), members.len().to_string());
            for (i, m) in members.iter().enumerate() {
                for (_, p) in m.to_params()?.iter() {
                    ck.params.add(format!("member{i}.{}", p.name), p.value.clone())?;
                }
            }
        }
        ModelKind::Logistic => {
            let (mean, std) = column_stats(&x);
            let m = LogisticModel::fit(&standardize(&x, &mean, &std)?, &y, LogisticConfig { lr: b.logistic_lr, epochs: b.logistic_epochs })?;
            ck.params.add("logistic.weights", Tensor::vector(m.weights))?;
            ck.params.add("logistic.bias", Tensor::scalar(m.bias))?;
            ck.params.add("logistic.means", Tensor::vector(mean))?;
            ck.params.add("logistic.stds", Tensor::vector(std))?;
        }
        ModelKind::Nn => unreachable!("handled by train_nn"),
    }
    ck.save(&dir.join(CHECKPOINT_FILE))?;
    if !summary.lambda_scores.is_empty() {
        let mut text = String::from("lambda\ttrial_pearson\n");
        for (l, r) in &summary.lambda_scores {
            let _ = writeln!(text, "{l}\t{}", r.map(|r| r.to_string()).unwrap_or_default());
        }
        write_with_sidecar(cfg, &cfg.paths.out_dir.join("lambda_scores.tsv"), &text)?;
    }
    Ok(summary)
}

/// A trained model reloaded from its directory.
pub enum LoadedModel {
    Nn(Box<Model>),
    Ridge(RidgeModel),
    Ensemble(Vec<RidgeModel>),
    Logistic { model: LogisticModel, mean: Vec<f64>, std: Vec<f64> },
}

/// Everything `predict` needs from a model directory.
pub struct ModelBundle {
    pub checkpoint: Checkpoint,
    /// Training-time configuration stored in the checkpoint.
    pub config: RunConfig,
    pub vectorizer: Option<NgramVectorizer>,
    pub model: LoadedModel,
}

fn tensor_vec(ck: &Checkpoint, name: &str) -> Result<Vec<f64>> {
    Ok(ck.tensor(name)?.data().to_vec())
}

impl ModelBundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let checkpoint = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        let mut config = RunConfig::default();
        for (k, v) in &checkpoint.config {
            config.set(k, v).map_err(|e| data(format!("checkpoint config: {e}")))?;
        }
        let vectorizer = match config.features.use_ngrams {
            true => Some(io::load_vectorizer(&dir.join(VECTORIZER_FILE))?),
            false => None,
        };
        let ck = &checkpoint;
        let kind: ModelKind = ck.meta("kind")?.parse()?;
        let model = match kind {
            ModelKind::Nn => {
                let graph = config.model.use_gcn.then(|| io::load_graph(&dir.join(GRAPH_FILE))).transpose()?;
                let mut m = Model::new(config.model, ck.columns.len(), graph)?;
                let names: Vec<String> = m.params.iter().map(|(_, p)| p.name.clone()).collect();
                for name in &names {
                    m.params.set_value(name, ck.tensor(name)?.clone())?;
                }
                let extra = ck.params.len() - 2;
                if extra != names.len() {
                    return Err(data(format!("checkpoint holds {extra} model tensors, the configured network has {}", names.len())));
                }
                m.set_standardization(tensor_vec(ck, STD_MEAN)?, tensor_vec(ck, STD_DEV)?)?;
                LoadedModel::Nn(Box::new(m))
            }
            ModelKind::Ridge => LoadedModel::Ridge(RidgeModel::from_params(&ck.params)?),
            ModelKind::Ensemble => {
                let k: usize = ck.meta("members")?.parse().map_err(|_| data("bad member count in checkpoint"))?;
                let members = (0..k)
                    .map(|i| {
                        let prefix = format!("member{i}.");
                        let mut ps = ParamSet::new();
                        for (_, p) in ck.params.iter().filter(|(_, p)| p.name.starts_with(&prefix)) {
                            ps.add(&p.name[prefix.len()..], p.value.clone())?;
                        }
                        Ok(RidgeModel::from_params(&ps)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                LoadedModel::Ensemble(members)
            }
            ModelKind::Logistic => {
                let bias = ck.tensor("logistic.bias")?.item()?;
                LoadedModel::Logistic {
                    model: LogisticModel { weights: tensor_vec(ck, "logistic.weights")?, bias },
                    mean: tensor_vec(ck, "logistic.means")?,
                    std: tensor_vec(ck, "logistic.stds")?,
                }
            }
        };
        Ok(ModelBundle { checkpoint, config, vectorizer, model })
    }

    fn feature_state(&self, inputs: &RunConfig) -> Result<FeatureState> {
        Ok(FeatureState {
            resources: io::load_lexicon_dir(inputs.paths.lexicon_dir.as_deref())?,
            vectorizer: self.vectorizer.clone(),
            annotations: inputs.paths.annotations.as_deref().map(Annotations::load).transpose()?,
            columns: self.checkpoint.columns.clone(),
        })
    }

    /// Scores `entries` with input files named by `inputs`. Entries that
    /// cannot be resolved come back as errors instead of failing the batch.
    pub fn predict(&self, inputs: &RunConfig, entries: &[Entry]) -> Result<Vec<std::result::Result<f64, String>>> {
        // Input files come from the caller, representation settings from training.
        let mut inputs = inputs.clone();
        inputs.oov = self.config.oov;
        inputs.baseline = self.config.baseline.clone();
        let inputs = &inputs;
        let state = self.feature_state(inputs)?;
        let needs_hc = match &self.model {
            LoadedModel::Nn(m) => m.config.use_handcrafted,
            _ => self.config.baseline.use_handcrafted,
        };
        let hc = needs_hc.then(|| state.block(entries)).transpose()?;
        if let LoadedModel::Nn(model) = &self.model {
            let words = load_words(inputs, model.config.word_dim)?;
            let contexts = load_contexts(inputs, model.config.context_dim)?;
            let src = FeatureSources { words: &words, contexts: &contexts, graph: model.graph(), handcrafted: hc.as_ref() };
            let built = assemble_examples_lenient(entries, &src, &model.config)?;
            let ok: Vec<_> = built.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
            let mut scores = model.predict(&ok)?.into_iter();
            return Ok(built.into_iter().map(|r| r.map(|_| scores.next().expect("one score per example")).map_err(|e| e.to_string())).collect());
        }
        let bi = BaselineInputs::load(inputs, &self.config)?;
        let rows = bi.rows(entries, hc.as_ref());
        let ok: Vec<&Vec<f64>> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
        let scores = match ok.is_empty() {
            true => Vec::new(),
            false => {
                let x = Matrix::from_rows(&ok)?;
                match &self.model {
                    LoadedModel::Ridge(m) => m.predict(&x)?,
                    LoadedModel::Ensemble(ms) => ensemble_predict(&ms.iter().map(|m| m.predict(&x)).collect::<lcp_core::Result<Vec<_>>>()?, None)?,
                    LoadedModel::Logistic { model, mean, std } => model.predict(&standardize(&x, mean, std)?)?,
                    LoadedModel::Nn(_) => unreachable!("handled above"),
                }
            }
        };
        let mut scores = scores.into_iter();
        Ok(rows.into_iter().map(|r| r.map(|_| scores.next().expect("one score per row"))).collect())
    }
}

#[derive(Debug, Clone)]
pub struct PredictSummary {
    pub output: PathBuf,
    pub predicted: usize,
    /// `(id, reason)` for entries without a prediction, rejected rows included.
    pub errors: Vec<(String, String)>,
}

/// Where the dataset to score comes from.
#[derive(Debug, Clone)]
pub enum PredictInput {
    Split(String),
    File(PathBuf),
}

/// Scores a dataset with a saved model. Writes `<output>` in submission
/// format, a `.meta` sidecar and, when some entries fail, an
/// `.errors.tsv` listing them.
pub fn cmd_predict(cfg: &RunConfig, model_dir: &Path, input: &PredictInput, output: Option<&Path>) -> Result<PredictSummary> {
    cfg.check_paths()?;
    let (path, name) = match input {
        PredictInput::Split(s) => (cfg.split_path(s)?.to_path_buf(), s.clone()),
        PredictInput::File(p) => (p.clone(), p.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned())),
    };
    let dataset = io::load_dataset(&path)?;
    let bundle = ModelBundle::load(model_dir)?;
    let results = bundle.predict(cfg, &dataset.entries)?;
    let mut errors: Vec<(String, String)> = dataset.rejects.iter().map(|r| (r.id.clone(), r.reason.clone())).collect();
    let (mut out_ids, mut scores) = (Vec::new(), Vec::new());
    for (e, r) in dataset.entries.iter().zip(results) {
        match r {
            Ok(s) => {
                out_ids.push(e.id.clone());
                scores.push(s);
            }
            Err(reason) => errors.push((e.id.clone(), reason)),
        }
    }
    let output = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.paths.out_dir.join("predictions").join(format!("{name}.tsv")));
    io::save_predictions(&output, &out_ids, &scores)?;
    let ck = &bundle.checkpoint;
    io::write_sidecar(
        &output,
        &[
            ("config_hash", ck.meta("config_hash")?.to_string()),
            ("seed", ck.meta("seed")?.to_string()),
            ("model_kind", ck.meta("kind")?.to_string()),
            ("predicted", scores.len().to_string()),
            ("errors", errors.len().to_string()),
        ],
    )?;
    let err_path = output.with_extension("errors.tsv");
    if errors.is_empty() {
        if err_path.exists() {
            std::fs::remove_file(&err_path).map_err(|e| LcpError::io(&err_path, e))?;
        }
    } else {
        let mut text = String::from("id\treason\n");
        for (id, reason) in &errors {
            let _ = writeln!(text, "{id}\t{}", reason.replace(['\t', '\n'], " "));
        }
        io::write_text(&err_path, &text)?;
    }
    Ok(PredictSummary { output, predicted: scores.len(), errors })
}

/// Aligns predictions with labeled entries; every entry needs a score.
fn aligned(entries: &[Entry], preds: &[(String, f64)], what: &Path) -> Result<Vec<f64>> {
    let map: BTreeMap<&str, f64> = preds.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let missing: Vec<&str> = entries.iter().filter(|e| !map.contains_key(e.id.as_str())).map(|e| e.id.as_str()).collect();
    if !missing.is_empty() {
        return Err(data(format!("{} lacks predictions for {} entries: {}", what.display(), missing.len(), missing.join(", "))));
    }
    let extra = preds.len() - entries.len().min(preds.len());
    if extra > 0 {
        log::warn!("{}: {extra} predictions have no gold entry and are ignored", what.display());
    }
    Ok(entries.iter().map(|e| map[e.id.as_str()]).collect())
}

#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub report: EvalReport,
    pub json: Value,
    pub table: String,
    pub json_path: PathBuf,
}

fn gold_entries(path: &Path) -> Result<Vec<Entry>> {
    let d = io::load_dataset(path)?;
    require_labeled(&d, &path.display().to_string())?;
    if !d.rejects.is_empty() {
        log::warn!("{}: {} gold rows rejected and not scored", path.display(), d.rejects.len());
    }
    Ok(d.entries)
}

/// Scores a prediction file against a labeled dataset and writes
/// `evaluate/report.json` and `evaluate/report.txt`. With `compare`, the
/// second file is scored too and a paired `compare.json` / `compare.txt`
/// is written instead.
pub fn cmd_evaluate(cfg: &RunConfig, predictions: &Path, gold: &Path, compare: Option<&Path>) -> Result<EvaluateSummary> {
    let entries = gold_entries(gold)?;
    let a_scores = aligned(&entries, &io::load_predictions(predictions)?, predictions)?;
    let a = build_report(&entries, &a_scores, cfg.worst_k)?;
    let dir = cfg.paths.out_dir.join("evaluate");
    let hash = cfg.hash();
    let (json, table, name) = match compare {
        None => {
            let json = report::report_json(&a, &hash, cfg.seed);
            let table = report::render_table(&json)?;
            (json, table, "report")
        }
        Some(other) => {
            let b_scores = aligned(&entries, &io::load_predictions(other)?, other)?;
            let b = build_report(&entries, &b_scores, cfg.worst_k)?;
            let (mut closer, mut ties) = (0, 0);
            for ((pa, pb), e) in a_scores.iter().zip(&b_scores).zip(&entries) {
                let g = e.gold.expect("labeled");
                let (ra, rb) = ((pa - g).abs(), (pb - g).abs());
                if rb < ra {
                    closer += 1;
                } else if rb == ra {
                    ties += 1;
                }
            }
            let json = report::compare_json(&a, &b, closer, ties, &hash, cfg.seed);
            let table = report::render_compare(&json)?;
            (json, table, "compare")
        }
    };
    let json_path = dir.join(format!("{name}.json"));
    io::write_text(&json_path, &(serde_json::to_string_pretty(&json).expect("report serializes") + "\n"))?;
    write_with_sidecar(cfg, &dir.join(format!("{name}.txt")), &table)?;
    Ok(EvaluateSummary { report: a, json, table, json_path })
}

/// Re-renders a saved report or comparison as a table.
pub fn cmd_report(path: &Path) -> Result<String> {
    let text = io::read_text(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| LcpError::parse(path, e.line(), e.to_string()))?;
    match v.get("delta") {
        Some(_) => report::render_compare(&v),
        None => report::render_table(&v),
    }
}

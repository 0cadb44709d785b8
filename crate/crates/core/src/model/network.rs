use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Example, ModelConfig};
use crate::capsule::CapsuleLayer;
use crate::error::{Error, Result};
use crate::graph::{GcnLayers, TextGraph};
use crate::nn::{BiLstmLayer, BoundBiLstm, Linear, ParamSet, Tape, Tensor, Var};

/// The full regression network: optional encoders feeding a three-layer
/// head, with hand-crafted features joining before the last layer.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    handcrafted_width: usize,
    hc_mean: Vec<f64>,
    hc_std: Vec<f64>,
    graph: Option<Arc<TextGraph>>,
    bilstm: Option<BiLstmLayer>,
    gcn: Option<GcnLayers>,
    capsule: Option<CapsuleLayer>,
    fc1: Linear,
    fc2: Linear,
    out: Linear,
}

/// Model weights placed on one tape.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bound {
    bilstm: Option<BoundBiLstm>,
    gcn: Option<(Var, Var)>,
    capsule: Option<Var>,
    fc1: (Var, Var),
    fc2: (Var, Var),
    out: (Var, Var),
}

fn affine(tape: &mut Tape, x: Var, (w, b): (Var, Var)) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    tape.add(h, b)
}

impl Model {
    /// Initializes every enabled block from `config.seed`. `graph` is
    /// required when the graph block is on; `handcrafted_width` is the
    /// number of late-joining feature columns (ignored when that block is
    /// off).
    pub fn new(config: ModelConfig, handcrafted_width: usize, graph: Option<TextGraph>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let handcrafted_width = if config.use_handcrafted { handcrafted_width } else { 0 };
        let bilstm = match config.use_char_bilstm {
            true => Some(BiLstmLayer::new(&mut params, "bilstm", config.bilstm, &mut rng)?),
            false => None,
        };
        let (gcn, graph) = match (config.use_gcn, graph) {
            (true, Some(g)) => (Some(GcnLayers::new(&mut params, "gcn", g.n_nodes(), config.gcn, &mut rng)?), Some(Arc::new(g))),
            (true, None) => return Err(Error::Usage("graph block enabled but no text graph given".into())),
            (false, _) => (None, None),
        };
        let capsule = match config.use_capsule {
            true => Some(CapsuleLayer::new(&mut params, "capsule", config.capsule, &mut rng)?),
            false => None,
        };
        let fc1 = Linear::new(&mut params, "head.fc1", config.pre_head_width(), config.hidden1, &mut rng)?;
        let fc2 = Linear::new(&mut params, "head.fc2", config.hidden1, config.hidden2, &mut rng)?;
        let out = Linear::new(&mut params, "head.out", config.hidden2 + handcrafted_width, 1, &mut rng)?;
        Ok(Model {
            config,
            params,
            handcrafted_width,
            hc_mean: vec![0.0; handcrafted_width],
            hc_std: vec![1.0; handcrafted_width],
            graph,
            bilstm,
            gcn,
            capsule,
            fc1,
            fc2,
            out,
        })
    }

    pub fn handcrafted_width(&self) -> usize {
        self.handcrafted_width
    }

    pub fn pre_head_width(&self) -> usize {
        self.config.pre_head_width()
    }

    pub fn graph(&self) -> Option<&TextGraph> {
        self.graph.as_deref()
    }

    /// Column means and standard deviations applied to hand-crafted values.
    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.hc_mean, &self.hc_std)
    }

    pub fn set_standardization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        let k = self.handcrafted_width;
        if mean.len() != k || std.len() != k {
            return Err(Error::ShapeMismatch { op: "standardization", lhs: vec![k], rhs: vec![mean.len(), std.len()] });
        }
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Data("standardization needs finite means and positive deviations".into()));
        }
        self.hc_mean = mean;
        self.hc_std = std;
        Ok(())
    }

    /// Estimates the hand-crafted standardization from training examples;
    /// constant columns keep a unit deviation.
    pub fn fit_standardization(&mut self, examples: &[Example]) -> Result<()> {
        let k = self.handcrafted_width;
        if k == 0 {
            return Ok(());
        }
        if examples.is_empty() {
            return Err(Error::Usage("cannot standardize over zero examples".into()));
        }
        let n = examples.len() as f64;
        let mut mean = vec![0.0; k];
        for e in examples {
            self.check_handcrafted(e)?;
            mean.iter_mut().zip(&e.handcrafted).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; k];
        for e in examples {
            var.iter_mut().zip(&e.handcrafted).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m) / n);
        }
        let std = var.into_iter().map(|v| if v > 1e-24 { libm::sqrt(v) } else { 1.0 }).collect();
        self.set_standardization(mean, std)
    }

    /// Sets the output layer to zero, so every prediction is `sigmoid(0)`.
    pub fn zero_head(&mut self) {
        for id in [self.out.weight, self.out.bias] {
            self.params.get_mut(id).value.data_mut().iter_mut().for_each(|w| *w = 0.0);
        }
    }

    fn check_handcrafted(&self, e: &Example) -> Result<()> {
        if e.handcrafted.len() != self.handcrafted_width {
            return Err(Error::ShapeMismatch {
                op: "hand-crafted features",
                lhs: vec![e.handcrafted.len()],
                rhs: vec![self.handcrafted_width],
            });
        }
        Ok(())
    }

    pub(crate) fn bind(&self, tape: &mut Tape) -> Bound {
        let p = &self.params;
        Bound {
            bilstm: self.bilstm.as_ref().map(|l| l.bind(tape, p)),
            gcn: self.gcn.as_ref().map(|g| g.bind(tape, p)),
            capsule: self.capsule.as_ref().map(|c| tape.param(p, c.weight())),
            fc1: (tape.param(p, self.fc1.weight), tape.param(p, self.fc1.bias)),
            fc2: (tape.param(p, self.fc2.weight), tape.param(p, self.fc2.bias)),
            out: (tape.param(p, self.out.weight), tape.param(p, self.out.bias)),
        }
    }

    /// Builds the pre-head block `[B, D]` and the standardized late block
    /// `[B, k]` (absent when `k = 0`).
    pub(crate) fn input_block(&self, tape: &mut Tape, bound: &Bound, batch: &[&Example]) -> Result<(Var, Option<Var>)> {
        let cfg = &self.config;
        let b = batch.len();
        if b == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        let mut words = Vec::with_capacity(b * cfg.word_dim);
        let mut contexts = Vec::with_capacity(b * cfg.context_dim);
        for e in batch {
            if e.word.len() != cfg.word_dim || e.context.len() != cfg.context_dim {
                return Err(Error::ShapeMismatch {
                    op: "example vectors",
                    lhs: vec![e.word.len(), e.context.len()],
                    rhs: vec![cfg.word_dim, cfg.context_dim],
                });
            }
            self.check_handcrafted(e)?;
            words.extend_from_slice(&e.word);
            contexts.extend_from_slice(&e.context);
        }
        let mut parts = vec![
            tape.constant(Tensor::matrix(b, cfg.word_dim, words)?),
            tape.constant(Tensor::matrix(b, cfg.context_dim, contexts)?),
        ];
        if let (Some(layer), Some(bl)) = (&self.bilstm, &bound.bilstm) {
            let rows = batch.iter().map(|e| layer.encode_bound(tape, bl, &e.target)).collect::<Result<Vec<_>>>()?;
            parts.push(tape.concat_rows(&rows)?);
        }
        if let (Some(layers), Some(w), Some(graph)) = (&self.gcn, bound.gcn, &self.graph) {
            let nodes = batch
                .iter()
                .map(|e| e.doc_node.ok_or_else(|| Error::Data(format!("entry {} has no graph node", e.id))))
                .collect::<Result<Vec<_>>>()?;
            parts.push(layers.forward_rows_bound(tape, w, graph, None, &nodes)?);
        }
        if let (Some(layer), Some(w)) = (&self.capsule, bound.capsule) {
            let rows = batch
                .iter()
                .map(|e| {
                    let ctx = tape.constant(Tensor::vector(e.context.clone()));
                    layer.features(tape, w, ctx)
                })
                .collect::<Result<Vec<_>>>()?;
            parts.push(tape.concat_rows(&rows)?);
        }
        let x = tape.concat_cols(&parts)?;
        let k = self.handcrafted_width;
        let late = if k > 0 {
            let mut data = Vec::with_capacity(b * k);
            for e in batch {
                data.extend(e.handcrafted.iter().zip(&self.hc_mean).zip(&self.hc_std).map(|((v, m), s)| (v - m) / s));
            }
            Some(tape.constant(Tensor::matrix(b, k, data)?))
        } else {
            None
        };
        Ok((x, late))
    }

    /// Head over an input block: optional dropout mask on `x`, two ReLU
    /// layers, late join, sigmoid output. Returns `[B, 1]`.
    pub(crate) fn head(&self, tape: &mut Tape, bound: &Bound, x: Var, late: Option<Var>, mask: Option<&Arc<Vec<f64>>>) -> Result<Var> {
        let x = match mask {
            Some(m) => tape.mul_const(x, Arc::clone(m))?,
            None => x,
        };
        let h = affine(tape, x, bound.fc1)?;
        let h = tape.relu(h);
        let h = affine(tape, h, bound.fc2)?;
        let h = tape.relu(h);
        let h = match late {
            Some(l) => tape.concat_cols(&[h, l])?,
            None => h,
        };
        let z = affine(tape, h, bound.out)?;
        Ok(tape.sigmoid(z))
    }

    /// Eval-mode scores, in input order.
    pub fn predict(&self, examples: &[Example]) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(examples.len());
        let refs: Vec<&Example> = examples.iter().collect();
        for chunk in refs.chunks(self.config.batch_size.max(1)) {
            let mut tape = Tape::new();
            let bound = self.bind(&mut tape);
            let (x, late) = self.input_block(&mut tape, &bound, chunk)?;
            let p = self.head(&mut tape, &bound, x, late, None)?;
            scores.extend_from_slice(tape.value(p).data());
        }
        Ok(scores)
    }

    /// Eval-mode MSE of `batch` against its golds, recorded on `tape`.
    /// After `backward`, `params.accumulate_grads(tape)` reads back the
    /// parameter gradients.
    pub fn loss(&self, tape: &mut Tape, batch: &[Example]) -> Result<Var> {
        let refs: Vec<&Example> = batch.iter().collect();
        let gold = refs
            .iter()
            .map(|e| e.gold.ok_or_else(|| Error::Data(format!("entry {} has no gold score", e.id))))
            .collect::<Result<Vec<_>>>()?;
        let bound = self.bind(tape);
        let (x, late) = self.input_block(tape, &bound, &refs)?;
        let p = self.head(tape, &bound, x, late, None)?;
        tape.mse(p, &gold)
    }

    /// The assembled head input of one example: the pre-head block followed
    /// by the standardized late block.
    pub fn assemble_input(&self, example: &Example) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let (x, late) = self.input_block(&mut tape, &bound, &[example])?;
        let mut v = tape.value(x).data().to_vec();
        if let Some(l) = late {
            v.extend_from_slice(tape.value(l).data());
        }
        Ok(v)
    }
}

//! Character-level bidirectional LSTM encoder.

use alloc::vec::Vec;

use rand::Rng;

use super::layers::join;
use super::param::{ParamId, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{usage, Result};

/// First printable ASCII character; index 0 is reserved for unknown chars.
const FIRST_CHAR: u32 = 0x20;
const LAST_CHAR: u32 = 0x7e;

/// Size of the fixed character inventory: UNK plus printable ASCII.
pub const CHAR_VOCAB: usize = (LAST_CHAR - FIRST_CHAR + 2) as usize;

/// Maps a character to its embedding row; anything outside printable ASCII
/// shares the UNK row 0.
pub fn char_index(c: char) -> usize {
    let u = c as u32;
    if (FIRST_CHAR..=LAST_CHAR).contains(&u) {
        (u - FIRST_CHAR + 1) as usize
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstmConfig {
    pub char_dim: usize,
    /// Hidden size of each direction.
    pub hidden: usize,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        BiLstmConfig { char_dim: 50, hidden: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Cell {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

impl Cell {
    fn new(params: &mut ParamSet, prefix: &str, config: BiLstmConfig, rng: &mut impl Rng) -> Result<Self> {
        let bound = 1.0 / libm::sqrt(config.hidden as f64);
        let g = 4 * config.hidden;
        Ok(Cell {
            w_ih: params.add(join(prefix, "w_ih"), Tensor::uniform(&[config.char_dim, g], bound, rng))?,
            w_hh: params.add(join(prefix, "w_hh"), Tensor::uniform(&[config.hidden, g], bound, rng))?,
            bias: params.add(join(prefix, "bias"), Tensor::uniform(&[g], bound, rng))?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct BoundCell {
    w_ih: Var,
    w_hh: Var,
    bias: Var,
}

/// BiLSTM weights already placed on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundBiLstm {
    embedding: Var,
    forward: BoundCell,
    backward: BoundCell,
}

/// Character embeddings feeding a forward and a backward LSTM; the encoding
/// is the concatenation of both final hidden states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiLstmLayer {
    pub config: BiLstmConfig,
    embedding: ParamId,
    forward: Cell,
    backward: Cell,
}

impl BiLstmLayer {
    pub fn new(params: &mut ParamSet, name: &str, config: BiLstmConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.char_dim == 0 || config.hidden == 0 {
            return Err(usage("BiLSTM widths must be positive"));
        }
        let embedding = params.add(join(name, "char_embedding"), Tensor::uniform(&[CHAR_VOCAB, config.char_dim], 0.1, rng))?;
        let forward = Cell::new(params, &join(name, "fwd"), config, rng)?;
        let backward = Cell::new(params, &join(name, "bwd"), config, rng)?;
        Ok(BiLstmLayer { config, embedding, forward, backward })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.config.hidden
    }

    /// Places the weights on `tape` once so several words can share them.
    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> BoundBiLstm {
        let mut cell = |c: &Cell| BoundCell {
            w_ih: tape.param(params, c.w_ih),
            w_hh: tape.param(params, c.w_hh),
            bias: tape.param(params, c.bias),
        };
        let (forward, backward) = (cell(&self.forward), cell(&self.backward));
        BoundBiLstm { embedding: tape.param(params, self.embedding), forward, backward }
    }

    /// Encodes `word` into a `[1, 2·hidden]` row. Each direction runs one
    /// step per character.
    pub fn encode(&self, tape: &mut Tape, params: &ParamSet, word: &str) -> Result<Var> {
        let bound = self.bind(tape, params);
        self.encode_bound(tape, &bound, word)
    }

    pub fn encode_bound(&self, tape: &mut Tape, bound: &BoundBiLstm, word: &str) -> Result<Var> {
        let idx: Vec<usize> = word.chars().map(char_index).collect();
        if idx.is_empty() {
            return Err(usage("BiLSTM input word is empty"));
        }
        let x = tape.gather_rows(bound.embedding, &idx)?;
        let h_fwd = self.run(tape, &bound.forward, x, false)?;
        let h_bwd = self.run(tape, &bound.backward, x, true)?;
        tape.concat_cols(&[h_fwd, h_bwd])
    }

    fn run(&self, tape: &mut Tape, cell: &BoundCell, x: Var, reverse: bool) -> Result<Var> {
        let h_dim = self.config.hidden;
        let steps = tape.shape(x)[0];
        let BoundCell { w_ih, w_hh, bias } = *cell;
        let projected = tape.matmul(x, w_ih)?;
        let projected = tape.add(projected, bias)?;
        let mut h = tape.constant(Tensor::zeros(&[1, h_dim]));
        let mut c = tape.constant(Tensor::zeros(&[1, h_dim]));
        for s in 0..steps {
            let t = if reverse { steps - 1 - s } else { s };
            let xt = tape.slice_rows(projected, t, t + 1)?;
            let rec = tape.matmul(h, w_hh)?;
            let gates = tape.add(xt, rec)?;
            let i = tape.slice_cols(gates, 0, h_dim)?;
            let f = tape.slice_cols(gates, h_dim, 2 * h_dim)?;
            let g = tape.slice_cols(gates, 2 * h_dim, 3 * h_dim)?;
            let o = tape.slice_cols(gates, 3 * h_dim, 4 * h_dim)?;
            let (i, f, g, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.tanh(g), tape.sigmoid(o));
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            c = tape.add(keep, write)?;
            let squashed = tape.tanh(c);
            h = tape.mul(o, squashed)?;
        }
        Ok(h)
    }
}

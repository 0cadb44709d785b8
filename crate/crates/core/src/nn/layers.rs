use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use super::param::{ParamId, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{usage, Result};

/// Train mode samples dropout masks; eval mode is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer `x·W + b` with `W: [in, out]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Weights and bias drawn from `U(-1/√in, 1/√in)`.
    pub fn new(params: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(usage(alloc::format!("linear layer {name} with zero width")));
        }
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        let weight = params.add(join(name, "weight"), Tensor::uniform(&[in_dim, out_dim], bound, rng))?;
        let bias = params.add(join(name, "bias"), Tensor::uniform(&[out_dim], bound, rng))?;
        Ok(Linear { weight, bias, in_dim, out_dim })
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let h = tape.matmul(x, w)?;
        tape.add(h, b)
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    let mut s = String::with_capacity(prefix.len() + name.len() + 1);
    s.push_str(prefix);
    s.push('.');
    s.push_str(name);
    s
}

/// Inverted dropout mask: kept entries are scaled by `1/(1-p)`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(usage(alloc::format!("dropout probability {p} outside [0, 1)")));
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect())
}

/// Identity in eval mode or when `p == 0`; otherwise multiplies by a fresh
/// inverted-dropout mask drawn from `rng`.
pub fn dropout(tape: &mut Tape, x: Var, p: f64, mode: Mode, rng: &mut impl Rng) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(usage(alloc::format!("dropout probability {p} outside [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).len(), p, rng)?;
    tape.mul_const(x, Arc::new(mask))
}

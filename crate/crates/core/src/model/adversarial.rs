use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};

/// Gradients smaller than this count as zero and yield no perturbation.
pub const MIN_GRAD_NORM: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AdversarialLoss {
    /// `L(x) + L(x + δ)`, or `L(x)` alone when `ε = 0`.
    pub total: Var,
    pub clean: Var,
    /// One perturbation per input, jointly of norm `ε` (or all zero).
    pub delta: Vec<Tensor>,
}

/// Fast-gradient perturbation of `inputs`: computes `L(x)`, takes
/// `g = ∂L/∂x` over all inputs jointly, sets `δ = ε·g/‖g‖` and returns the
/// combined loss. With `ε = 0` only the clean loss is built, so training
/// matches the plain objective exactly.
pub fn adversarial_loss<F>(tape: &mut Tape, inputs: &[Var], epsilon: f64, mut loss_fn: F) -> Result<AdversarialLoss>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Usage(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if epsilon == 0.0 {
        let clean = loss_fn(tape, inputs)?;
        let delta = inputs.iter().map(|v| Tensor::zeros(tape.shape(*v))).collect();
        return Ok(AdversarialLoss { total: clean, clean, delta });
    }
    let watched: Vec<Var> = inputs.iter().map(|v| tape.watch(*v)).collect();
    let clean = loss_fn(tape, &watched)?;
    let grads = tape.grad_of(clean, &watched)?;
    let norm = libm::sqrt(grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>());
    let scale = if norm < MIN_GRAD_NORM { 0.0 } else { epsilon / norm };
    let delta: Vec<Tensor> = grads
        .into_iter()
        .map(|mut g| {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect();
    let mut perturbed = Vec::with_capacity(inputs.len());
    for (v, d) in watched.iter().zip(&delta) {
        let c = tape.constant(d.clone());
        perturbed.push(tape.add(*v, c)?);
    }
    let adversarial = loss_fn(tape, &perturbed)?;
    let total = tape.add(clean, adversarial)?;
    Ok(AdversarialLoss { total, clean, delta })
}

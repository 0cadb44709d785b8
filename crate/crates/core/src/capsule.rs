//! Capsule layer with dynamic routing between a primary capsule grid and a
//! small set of output capsules.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{usage, Error, Result};
use crate::nn::layers::join;
use crate::nn::tape::squash_factor;
use crate::nn::{ParamId, ParamSet, Tape, Tensor, Var};

/// Squash nonlinearity `‖s‖²/(1+‖s‖²) · s/‖s‖`; the zero vector maps to zero.
pub fn squash(s: &[f64]) -> Vec<f64> {
    let f = squash_factor(s.iter().map(|x| x * x).sum());
    s.iter().map(|x| x * f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapsuleConfig {
    pub n_in: usize,
    pub d_in: usize,
    pub n_out: usize,
    pub d_out: usize,
    pub routings: usize,
}

impl Default for CapsuleConfig {
    fn default() -> Self {
        CapsuleConfig { n_in: 48, d_in: 16, n_out: 10, d_out: 16, routings: 5 }
    }
}

impl CapsuleConfig {
    pub fn input_dim(&self) -> usize {
        self.n_in * self.d_in
    }

    pub fn output_dim(&self) -> usize {
        self.n_out * self.d_out
    }
}

/// Transform weights are stored as `[n_in, n_out·d_out, d_in]`, so row
/// `(i, j·d_out + k)` is the k-th output row of `Ŵ(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapsuleLayer {
    pub config: CapsuleConfig,
    weight: ParamId,
}

/// Routing output together with the coupling matrix used at each iteration.
#[derive(Debug, Clone)]
pub struct RoutingTrace {
    pub output: Var,
    pub couplings: Vec<Tensor>,
}

impl CapsuleLayer {
    pub fn new(params: &mut ParamSet, name: &str, config: CapsuleConfig, rng: &mut impl Rng) -> Result<Self> {
        let CapsuleConfig { n_in, d_in, n_out, d_out, routings } = config;
        if n_in == 0 || d_in == 0 || n_out == 0 || d_out == 0 {
            return Err(usage("capsule dimensions must be positive"));
        }
        if routings == 0 {
            return Err(usage("capsule routings must be at least 1"));
        }
        let w = Tensor::uniform(&[n_in, n_out * d_out, d_in], 0.1, rng);
        let weight = params.add(join(name, "weight"), w)?;
        Ok(CapsuleLayer { config, weight })
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    /// Routes primary capsules `u: [n_in, d_in]` to `[n_out, d_out]`.
    pub fn route(&self, tape: &mut Tape, params: &ParamSet, u: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        Ok(self.route_with(tape, w, u, false)?.output)
    }

    /// Like [`route`](Self::route) with the weight already on the tape,
    /// so a batch can share one copy.
    pub fn route_shared(&self, tape: &mut Tape, weight: Var, u: Var) -> Result<Var> {
        Ok(self.route_with(tape, weight, u, false)?.output)
    }

    /// Routing that also records the couplings of every iteration.
    pub fn route_traced(&self, tape: &mut Tape, params: &ParamSet, u: Var) -> Result<RoutingTrace> {
        let w = tape.param(params, self.weight);
        self.route_with(tape, w, u, true)
    }

    fn route_with(&self, tape: &mut Tape, w: Var, u: Var, trace: bool) -> Result<RoutingTrace> {
        let CapsuleConfig { n_in, d_in, n_out, d_out, routings } = self.config;
        if tape.shape(u) != [n_in, d_in] {
            return Err(Error::ShapeMismatch { op: "dynamic_routing", lhs: tape.shape(u).to_vec(), rhs: vec![n_in, d_in] });
        }
        let u_hat = tape.batch_matvec(w, u)?;
        let u_hat = tape.reshape(u_hat, &[n_in, n_out, d_out])?;
        let mut logits = tape.constant(Tensor::zeros(&[n_in, n_out]));
        let mut couplings = Vec::new();
        let mut v = None;
        for r in 0..routings {
            let c = tape.softmax_rows(logits)?;
            if trace {
                couplings.push(tape.value(c).clone());
            }
            let s = tape.route_sum(c, u_hat)?;
            let out = tape.squash_rows(s)?;
            // The final logit update would never be read.
            if r + 1 < routings {
                let agree = tape.agreement(u_hat, out)?;
                logits = tape.add(logits, agree)?;
            }
            v = Some(out);
        }
        let output = v.expect("routings >= 1 checked at construction");
        Ok(RoutingTrace { output, couplings })
    }

    /// Reshapes a contextual vector `[1, n_in·d_in]` (or flat) into primary
    /// capsules, routes them and flattens the result to `[1, n_out·d_out]`.
    pub fn features(&self, tape: &mut Tape, weight: Var, context: Var) -> Result<Var> {
        let cfg = self.config;
        if tape.value(context).len() != cfg.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "capsule_features",
                lhs: tape.shape(context).to_vec(),
                rhs: vec![cfg.input_dim()],
            });
        }
        let u = tape.reshape(context, &[cfg.n_in, cfg.d_in])?;
        let v = self.route_shared(tape, weight, u)?;
        tape.reshape(v, &[1, cfg.output_dim()])
    }
}

/// Untaped convenience: capsule features of one contextual vector.
pub fn capsule_features(layer: &CapsuleLayer, params: &ParamSet, context: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(context.to_vec()));
    let w = tape.param(params, layer.weight);
    let out = layer.features(&mut tape, w, x)?;
    Ok(tape.value(out).data().to_vec())
}

use alloc::string::String;
use alloc::vec::Vec;

use super::tape::Tape;
use super::tensor::Tensor;
use crate::error::{usage, Error, Result};

/// Index of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Vec<f64>>,
}

/// Ordered collection of named parameters. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.find(&name).is_some() {
            return Err(usage(alloc::format!("duplicate parameter name {name:?}")));
        }
        self.params.push(Param { name, value, grad: None });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Adds the gradients collected on a tape's parameter leaves.
    pub fn accumulate_grads(&mut self, tape: &Tape) {
        for (id, g) in tape.param_grads() {
            let p = &mut self.params[id.0];
            match &mut p.grad {
                Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                None => p.grad = Some(g.to_vec()),
            }
        }
    }

    /// Gives every parameter that received no gradient an explicit zero one
    /// (a block can be cut off from the loss, e.g. by dead ReLUs).
    pub fn fill_missing_grads(&mut self) {
        for p in &mut self.params {
            if p.grad.is_none() {
                p.grad = Some(alloc::vec![0.0; p.value.len()]);
            }
        }
    }

    /// Overwrites a parameter value by name, checking the shape.
    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self.find(name).ok_or_else(|| usage(alloc::format!("unknown parameter {name:?}")))?;
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch { op: "set_value", lhs: p.value.shape().to_vec(), rhs: value.shape().to_vec() });
        }
        p.value = value;
        Ok(())
    }

    /// Snapshot of all values (used to keep the best checkpoint).
    pub fn values(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: Vec<Tensor>) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v;
        }
    }
}

use alloc::vec;
use alloc::vec::Vec;

use super::param::ParamSet;
use crate::error::{usage, Result};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 2e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// Adam with decoupled weight decay. Moment buffers are allocated on the
/// first step and matched to parameters by position.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        AdamW { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One in-place update of every parameter. All parameters must carry a
    /// gradient.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if let Some((_, p)) = params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(usage(alloc::format!("parameter {:?} has no gradient", p.name)));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() {
            return Err(usage("optimizer state does not match parameter set"));
        }
        self.step += 1;
        let AdamWConfig { lr, beta1, beta2, eps, weight_decay } = self.config;
        let bc1 = 1.0 - libm::pow(beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.step as f64);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.as_ref().expect("checked above");
            for (((w, gi), mi), vi) in p.value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *w -= lr * weight_decay * *w;
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn single(w: f64, g: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::vector(vec![w])).unwrap();
        ps.get_mut(id).grad = Some(vec![g]);
        ps
    }

    fn w(ps: &ParamSet) -> f64 {
        ps.iter().next().unwrap().1.value.data()[0]
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = 1, v̂ = 1 after bias correction, so the step is lr/(1+eps).
        let mut ps = single(1.0, 1.0);
        let mut opt = AdamW::new(AdamWConfig { lr: 0.1, weight_decay: 0.0, ..Default::default() });
        opt.step(&mut ps).unwrap();
        assert!((w(&ps) - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((w(&ps) - 0.9).abs() < 1e-8);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_cases() {
        let mut ps = single(1.0, 0.0);
        AdamW::new(AdamWConfig { lr: 0.1, weight_decay: 0.0, ..Default::default() }).step(&mut ps).unwrap();
        assert_eq!(w(&ps), 1.0);

        let mut ps = single(2.0, 0.0);
        AdamW::new(AdamWConfig { lr: 0.1, weight_decay: 0.1, ..Default::default() }).step(&mut ps).unwrap();
        assert_eq!(w(&ps), 2.0 * (1.0 - 0.01));
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::vector(vec![1.0])).unwrap();
        assert!(AdamW::new(AdamWConfig::default()).step(&mut ps).is_err());
    }
}

use crate::capsule::CapsuleConfig;
use crate::error::{usage, Result};
use crate::graph::{GcnConfig, GraphConfig};
use crate::nn::BiLstmConfig;

/// Architecture toggles and training hyperparameters. The word-embedding
/// and contextual blocks are always on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub use_char_bilstm: bool,
    pub use_gcn: bool,
    pub use_capsule: bool,
    pub use_handcrafted: bool,
    pub use_adversarial: bool,
    pub word_dim: usize,
    pub context_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Perturbation radius of the adversarial pass; 0 disables the pass.
    pub epsilon: f64,
    pub seed: u64,
    pub bilstm: BiLstmConfig,
    pub graph: GraphConfig,
    pub gcn: GcnConfig,
    pub capsule: CapsuleConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            use_char_bilstm: true,
            use_gcn: true,
            use_capsule: true,
            use_handcrafted: true,
            use_adversarial: true,
            word_dim: 300,
            context_dim: 768,
            hidden1: 512,
            hidden2: 256,
            dropout: 0.3,
            epochs: 30,
            batch_size: 32,
            lr: 2e-5,
            weight_decay: 0.01,
            epsilon: 1.0,
            seed: 42,
            bilstm: BiLstmConfig::default(),
            graph: GraphConfig::default(),
            gcn: GcnConfig::default(),
            capsule: CapsuleConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Only the word-embedding and contextual blocks.
    pub fn permanent_only() -> Self {
        ModelConfig {
            use_char_bilstm: false,
            use_gcn: false,
            use_capsule: false,
            use_handcrafted: false,
            use_adversarial: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("word_dim", self.word_dim),
            ("context_dim", self.context_dim),
            ("hidden1", self.hidden1),
            ("hidden2", self.hidden2),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(usage(alloc::format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(usage(alloc::format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(usage(alloc::format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(usage(alloc::format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(usage("weight_decay must be non-negative"));
        }
        if self.use_capsule && self.capsule.input_dim() != self.context_dim {
            return Err(usage(alloc::format!(
                "capsule grid {}x{} does not cover the {}-d contextual vector",
                self.capsule.n_in,
                self.capsule.d_in,
                self.context_dim
            )));
        }
        if self.capsule.routings == 0 {
            return Err(usage("capsule routings must be at least 1"));
        }
        Ok(())
    }

    /// Width of the block fed to the first head layer.
    pub fn pre_head_width(&self) -> usize {
        let mut w = self.word_dim + self.context_dim;
        if self.use_char_bilstm {
            w += 2 * self.bilstm.hidden;
        }
        if self.use_gcn {
            w += self.gcn.output;
        }
        if self.use_capsule {
            w += self.capsule.output_dim();
        }
        w
    }

    /// Whether the adversarial pass actually runs.
    pub fn adversarial_active(&self) -> bool {
        self.use_adversarial && self.epsilon > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(ModelConfig::permanent_only().pre_head_width(), 1068);
        // 300 + 768 + 256 + 256 + 160
        assert_eq!(ModelConfig::default().pre_head_width(), 1740);
        let mut c = ModelConfig::permanent_only();
        let mut last = c.pre_head_width();
        for (toggle, size) in [(0, 256), (1, 256), (2, 160)] {
            match toggle {
                0 => c.use_char_bilstm = true,
                1 => c.use_gcn = true,
                _ => c.use_capsule = true,
            }
            assert_eq!(c.pre_head_width(), last + size);
            last = c.pre_head_width();
        }
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { dropout: 1.0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { context_dim: 700, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { context_dim: 700, ..ModelConfig::permanent_only() }.validate().is_ok());
        assert!(ModelConfig { epsilon: -1.0, ..ModelConfig::default() }.validate().is_err());
    }
}

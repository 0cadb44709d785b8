//! The modular regression network, its training loop and the adversarial
//! input perturbation.

mod adversarial;
mod config;
mod example;
mod network;
mod train;

pub use adversarial::{adversarial_loss, AdversarialLoss, MIN_GRAD_NORM};
pub use config::ModelConfig;
pub use example::{assemble_examples, assemble_examples_lenient, build_example, Example, FeatureSources};
pub use network::Model;
pub use train::{train, EpochRecord, History};

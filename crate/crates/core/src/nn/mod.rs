//! Dense tensors, a reverse-mode gradient tape and the layers the
//! regression architecture is built from.

pub mod layers;
pub mod lstm;
pub mod optim;
pub mod param;
pub mod tape;
pub mod tensor;

pub use layers::{dropout, Linear, Mode};
pub use lstm::{BiLstmConfig, BiLstmLayer, BoundBiLstm};
pub use optim::{AdamW, AdamWConfig};
pub use param::{Param, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

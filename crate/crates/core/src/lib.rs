//! Numeric core for lexical complexity prediction.
//!
//! Everything here is pure computation over in-memory data and builds
//! without `std` (only `alloc` is required). File formats, configuration
//! and the command-line driver live in the companion `lcp` crate.
//!
//! Module map:
//!
//! - [`text`] and [`dataset`]: sentence preprocessing, target-span
//!   resolution, entries and word/context vector tables.
//! - [`features`]: syllables, lexicon features, character n-gram TF-IDF,
//!   coverage-based column selection.
//! - [`nn`]: dense tensors, a reverse-mode gradient tape, layers, AdamW and
//!   the character BiLSTM.
//! - [`graph`]: document-word text graph and two-layer graph convolution.
//! - [`capsule`]: squash and dynamic routing.
//! - [`model`]: the modular regression architecture, training with
//!   optional adversarial perturbation, prediction.
//! - [`baselines`]: ridge, sigmoid-output linear regression, ensembles.
//! - [`metrics`]: Pearson, MAE and sliced evaluation reports.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod capsule;
pub mod dataset;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod text;

pub use error::{Error, Result};

//! File formats, run configuration and the command pipeline around
//! [`lcp_core`].
//!
//! - [`io`]: dataset TSV, word and context vector text files, lexicon CSVs,
//!   the fitted n-gram vectorizer, checkpoints, graph dumps, prediction and
//!   feature tables.
//! - [`config`]: the flat `section.key = value` run configuration and its
//!   hash.
//! - [`pipeline`]: `ingest`, `features`, `train`, `predict`, `evaluate` and
//!   `report`.
//! - [`report`]: JSON and table rendering of evaluation reports.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use config::{ModelKind, RunConfig};
pub use error::{LcpError, Result};

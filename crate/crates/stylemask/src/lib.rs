//! File formats, batch studies and the command line around
//! [`stylemask_core`].
//!
//! - [`io`]: EMB1 binary embeddings, sidecar manifests and JSON fixtures.
//! - [`harness`]: energy sweeps, clustering-number sweeps, corpus
//!   evaluation and seeded theory trials.
//! - [`cli`]: the `stylemask` binary.

pub mod cli;
mod error;
pub mod harness;
pub mod io;

pub use error::{AppError, Result};

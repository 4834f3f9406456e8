//! Estimate how often random projective measurements on a multipartite
//! quantum state produce statistics without a local-realistic model.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod local;
pub mod measurement;
pub mod state;

pub use error::{Error, Result};

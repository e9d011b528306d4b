//! Metacognitive diagnostics for trial-level LLM evaluation records.
//!
//! The pipeline turns `(correct, nlp)` trials into Type-1 d′, maximum-likelihood
//! meta-d′, M-ratio, Type-2 AUROC and NLP gap per analysis cell, and runs
//! question-level bootstrap contrasts on top of it.

pub mod binning;
pub mod cli;
pub mod config;
pub mod error;
pub mod nonparam;
pub mod optim;
pub mod profile;
pub mod report;
pub mod resample;
pub mod synth;
pub mod sdt;
pub mod trialstore;

pub use error::{Error, Result};

//! Continual active learning.
//!
//! Batch active learning where each query round updates the previous model
//! with replay-based continual training instead of retraining from scratch.
//! The crate provides the classifier and its losses ([`nn`]), datasets and
//! pool bookkeeping ([`data`]), acquisition policies ([`acquisition`]),
//! submodular selection ([`submodular`]), the replay strategies
//! ([`replay`]), the outer loops ([`orchestrator`]), metrics and reports
//! ([`bench`]) and the JSON run configuration ([`config`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod bench;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fmt;
pub mod nn;
pub mod orchestrator;
pub mod replay;
pub mod rng;
pub mod submodular;

pub use error::{Error, Result};

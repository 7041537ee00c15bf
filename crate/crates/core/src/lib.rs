//! Desk-scale laboratory for multi-attribute text style transfer.
//!
//! The pipeline: build or ingest two styled corpora (one binary style
//! attribute each), normalize content through a trainable pivot-cipher
//! back-translation round trip, train per-attribute sentence classifiers,
//! then train a single decoder that reconstructs normalized content while
//! two frozen classifiers steer it toward a requested style pair via a
//! weighted joint loss. Sequential single-attribute baselines and the
//! evaluation stack (mean-embedding content preservation, classifier
//! style strength) complete the loop.

pub mod baselines;
pub mod classifiers;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod kvcfg;
pub mod nn;
pub mod normalizer;
pub mod seq2seq;
pub mod stms;

pub use error::{Error, Result};

//! Joint transaction language model and graph representation learning for
//! Ethereum phishing account detection.
//!
//! The pipeline turns raw transfers into quantized "transaction sentences",
//! pretrains a small masked-language-model encoder over them, builds
//! NPMI/TF-IDF vocabulary graphs and a weighted account interaction graph,
//! fuses semantic and similarity embeddings through a multi-head attention
//! classifier, and jointly trains that classifier with a GCN over the account
//! graph via interpolated predictions.

pub mod aig;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod synth;
pub mod tasg;
pub mod tensor;
pub mod tlm;

pub use error::{Error, Result};

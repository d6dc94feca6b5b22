//! Single-machine runtime for agentic RAG ingestion and retrieval benchmarks.
//!
//! The crate is organised around the operators of an ingestion DAG
//! (load, transform, embed, upsert) plus the retrieval-side memory layer:
//!
//! - [`corpus`]: seeded synthetic corpus, delimiter splitting, conversational cases
//! - [`embedder`]: SHA-256 derived embeddings with an affine latency model
//! - [`vecindex`]: exact flat and sharded vector indices
//! - [`memory`]: STM / LTM / episodic memory with gated writes and fusion
//! - [`pipeline`]: five execution modes, bounded channels, stage timing
//! - [`costmodel`]: analytic runtime predictors and Ω residuals
//! - [`evalmetrics`]: Top-1, Hit@k, MRR and latency aggregation
//! - [`bench`]: benchmark drivers and CSV reports used by the CLI

pub mod bench;
pub mod corpus;
pub mod costmodel;
pub mod embedder;
pub mod error;
pub mod evalmetrics;
pub mod exec;
pub mod lexical;
pub mod memory;
pub mod pipeline;
pub mod vecindex;

pub use error::{Error, Result};
pub use exec::Exec;

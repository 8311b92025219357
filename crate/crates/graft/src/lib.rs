//! graft: a retrieval experimentation toolkit.
//!
//! Sparse (BM25), dense and learned sparse document ranking with two kinds
//! of query feedback — pseudo-relevance feedback from first-pass results and
//! generative feedback from pre-generated LLM text — plus rank fusion of the
//! two signals, TREC-style evaluation, and cross-validated tuning.
//!
//! Modules follow the experiment pipeline:
//!
//! * [`corpus`], [`run`], [`qrels`], [`folds`], [`vectors`] — data model and
//!   every external file format;
//! * [`analysis`] — tokenization and passage sharding;
//! * [`index`], [`bm25`] — inverted indexing and sparse retrieval;
//! * [`feedback`] — RM3 and generative expansion for the sparse paradigm;
//! * [`dense`] — exact inner-product retrieval with Rocchio feedback;
//! * [`learned`] — impact search over sparse representations with feedback;
//! * [`fusion`] — (weighted) reciprocal rank fusion;
//! * [`eval`] — MAP / nDCG / Recall and the paired t-test;
//! * [`tune`] — cross-validated grid search and zero-shot transfer;
//! * [`pipelines`] — ready-made parameterized retrieval configurations;
//! * [`synth`] — deterministic synthetic fixtures for tests and demos.

pub mod analysis;
pub mod bm25;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod feedback;
pub mod folds;
pub mod fusion;
pub mod index;
pub mod learned;
pub mod pipelines;
pub mod porter;
pub mod qrels;
pub mod run;
pub mod stats;
pub mod synth;
pub mod tune;
pub mod vectors;

pub use error::{Error, Result};

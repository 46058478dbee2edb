//! Core algorithms for detecting cyberbullying in short Spanish texts.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`corpus`]: ingestion helpers, keyword filtering, text normalization
//!    and a seeded synthetic corpus generator.
//! 2. [`vocab`]: frequency distribution, rank-indexed vocabulary (index 1 is
//!    the most frequent token) and fixed-length encoding.
//! 3. [`zipf`]: rank/frequency analysis and a log-log power-law fit used to
//!    sanity-check a corpus.
//! 4. [`embeddings`]: word2vec text-format parsing and the vocabulary-aligned
//!    embedding matrix.
//! 5. [`model`] and [`eval`]: a convolutional sentence classifier with
//!    analytic gradients, and the repeated train/test protocol with
//!    per-epoch [`checkpoint`]s.
//!
//! The crate is `no_std` and only needs `alloc`. File IO, the CLI and
//! parallel cross-validation live in the `acoso` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod checkpoint;
pub mod corpus;
pub mod embeddings;
pub mod eval;
mod math;
pub mod model;
pub mod rng;
pub mod vocab;
pub mod zipf;

pub use corpus::{KeywordSet, Label, LabeledText, Polarity, PreprocessConfig};
pub use embeddings::{EmbeddingMatrix, WordVectorStore};
pub use eval::{Checkpoint, CrossValReport, IterationReport, TrainConfig};
pub use model::{Gradients, ModelConfig, ModelParams};
pub use vocab::{EncodedDataset, FrequencyTable, Vocabulary};
pub use zipf::{RankFrequency, ZipfFit};

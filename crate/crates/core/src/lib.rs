//! Attention-based bidirectional LSTM for binary text classification.
//!
//! The crate covers the whole pipeline: text normalization and length
//! fitting, vocabulary and embedding construction, an LSTM with exact
//! backpropagation through time, the attention and classifier head trained
//! with AdaMax, bag-of-words baselines, cross-validated evaluation with the
//! Wilcoxon signed-rank test, and attention-based explanation exports.

pub mod baselines;
pub mod corpus;
pub mod evalstat;
pub mod explain;
pub mod model;
pub mod numkit;
pub mod pipeline;
pub mod recurrent;
pub mod textprep;
pub mod vocab;

pub use model::{AttBlstmModel, ModelConfig, Variant};
pub use numkit::{Matrix, Rng};
pub use textprep::{Preprocessor, TokenSeq};
pub use vocab::{EmbeddingMode, EmbeddingTable, Vocabulary};

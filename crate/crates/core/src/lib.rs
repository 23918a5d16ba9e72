//! cesna-core: contrastive learning of emoji-labeled sentence embeddings.
//!
//! The pipeline, end to end:
//!
//! 1. [`corpus`] — load raw tweets, extract exactly one emoji label per
//!    tweet, clean the text, pick the active label set, split, and build
//!    contrastive pairs (plus a deterministic synthetic generator).
//! 2. [`features`] — map text to character-trigram index sequences over a
//!    frequency-ordered vocabulary.
//! 3. [`encoder`] — a shared-parameter bidirectional LSTM encoder with a
//!    rectified linear projection, plus exact backpropagation.
//! 4. [`loss`] — the margin-based contrastive cosine objective.
//! 5. [`trainer`] — minibatch training with SGD or Adam, gradient
//!    checking, and bit-exact checkpoint persistence.
//! 6. [`eval`] — reference-voting classification, precision/recall/F1
//!    reporting, and emoji cluster reduction.
//!
//! Everything that samples takes an explicit seed, and every run with the
//! same inputs, configuration, and seed reproduces identical bytes: pair
//! lists, trained checkpoints, metrics.

pub mod corpus;
pub mod emoji;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod features;
pub mod loss;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};

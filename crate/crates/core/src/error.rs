//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All the ways corpus handling, training, or evaluation can fail.
///
/// Variants are grouped roughly by pipeline stage; the CLI maps them onto
/// process exit codes (diverged training and failed gradient checks are
/// verification failures, everything else is a usage or data error).
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    // --- corpus ---
    #[error("malformed input line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("no usable records after cleaning")]
    NoUsableRecords,

    #[error("requested top-{k} labels but only {distinct} distinct labels exist")]
    NotEnoughLabels { k: usize, distinct: usize },

    #[error("a label set needs at least 2 labels, got k = {0}")]
    LabelSetTooSmall(usize),

    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadSplitRatios([f64; 3]),

    #[error("label {label:?} has {count} records, need at least 3 to stratify")]
    LabelTooRare { label: String, count: usize },

    #[error("label {0:?} is present on the anchor side but absent from the reference corpus")]
    LabelMissingInReferences(String),

    #[error("pair construction needs at least 2 labels on the reference side, got {0}")]
    NoNegativeSource(usize),

    #[error("no word-template pool is configured for label {0:?}")]
    EmptyTemplatePool(String),

    // --- features ---
    #[error("vocabulary is empty after applying min_count = {min_count}")]
    EmptyVocab { min_count: u32 },

    #[error("text is {got} codepoints long; trigram encoding needs at least 3")]
    TextTooShort { got: usize },

    #[error("malformed vocabulary file at line {line}: {reason}")]
    VocabParse { line: usize, reason: String },

    // --- encoder / loss ---
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty trigram sequence cannot be encoded")]
    EmptySequence,

    #[error("margin must lie in [0, 1], got {0}")]
    MarginOutOfRange(f64),

    #[error("match threshold must lie in [-1, 1], got {0}")]
    ThresholdOutOfRange(f64),

    #[error("batch is empty")]
    EmptyBatch,

    // --- trainer ---
    #[error("training diverged: non-finite mean loss in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("invalid training configuration: {0}")]
    BadConfig(String),

    // --- checkpoint ---
    #[error("bad checkpoint magic; expected a file starting with \"CESNA1\\n\"")]
    CheckpointMagic,

    #[error("malformed checkpoint header: {0}")]
    CheckpointHeader(String),

    #[error("checkpoint is truncated or padded: expected {expected} tensor bytes, found {found}")]
    CheckpointSize { expected: usize, found: usize },

    #[error(
        "vocabulary hash mismatch: checkpoint expects {expected}, sidecar file hashes to {found}"
    )]
    VocabHashMismatch { expected: String, found: String },

    // --- eval ---
    #[error("reference set is empty")]
    EmptyReferenceSet,

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("label {label:?} has no reference tweets at all")]
    NoReferencesForLabel { label: String },
}

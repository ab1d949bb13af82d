//! Autoregressive model interface and the built-in model zoo.
//!
//! Everything the engine needs from a model is [`LanguageModel`]: a
//! vocabulary size and a (batched) map from token prefixes to raw next-token
//! scores. The concrete models are cheap desk-scale stand-ins: n-gram
//! tables, a copy-from-context heuristic, a uniform model and fixed
//! distributions.

mod copy;
mod ngram;
mod persist;
mod simple;
mod tokenizer;

use thiserror::Error;

pub use copy::CopyModel;
pub use ngram::{train_ngram, NGramModel, DEFAULT_SMOOTHING};
pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use simple::{random_model, StatelessModel, UniformModel};
pub use tokenizer::{Tokenizer, BYTE_BOS, BYTE_EOS, BYTE_VOCAB_SIZE};

use crate::distmath::{ScoreKind, TokenId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("corpus has {len} tokens, need at least {order} for an order-{order} model")]
    CorpusTooShort { len: usize, order: usize },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("token {token} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("model file checksum mismatch (truncated or corrupt)")]
    ChecksumMismatch,
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("unknown word {0:?} and no <unk> entry in vocabulary")]
    UnknownWord(String),
}

/// A next-token scorer over a fixed vocabulary.
///
/// Implementations must be deterministic, and `evaluate_batch(prefixes)[i]`
/// must be bitwise identical to `evaluate(prefixes[i])`: batching may change
/// how work is scheduled but never what is computed.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Interpretation of the vectors returned by `evaluate`.
    fn score_kind(&self) -> ScoreKind {
        ScoreKind::Probabilities
    }

    fn evaluate(&self, prefix: &[TokenId]) -> Vec<f64>;

    fn evaluate_batch(&self, prefixes: &[Vec<TokenId>]) -> Vec<Vec<f64>> {
        prefixes.iter().map(|p| self.evaluate(p)).collect()
    }

    /// Short human-readable description for reports.
    fn describe(&self) -> String {
        format!("model(vocab={})", self.vocab_size())
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn score_kind(&self) -> ScoreKind {
        (**self).score_kind()
    }
    fn evaluate(&self, prefix: &[TokenId]) -> Vec<f64> {
        (**self).evaluate(prefix)
    }
    fn evaluate_batch(&self, prefixes: &[Vec<TokenId>]) -> Vec<Vec<f64>> {
        (**self).evaluate_batch(prefixes)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn score_kind(&self) -> ScoreKind {
        (**self).score_kind()
    }
    fn evaluate(&self, prefix: &[TokenId]) -> Vec<f64> {
        (**self).evaluate(prefix)
    }
    fn evaluate_batch(&self, prefixes: &[Vec<TokenId>]) -> Vec<Vec<f64>> {
        (**self).evaluate_batch(prefixes)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

//! CBOW word embeddings trained with negative sampling, plus cosine
//! nearest-neighbour lookup over the trained vocabulary.

mod io;
mod neighbors;
pub mod objective;
mod train;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use io::{encode_model, load_model, save_model, sidecar_path};
pub use neighbors::{cosine, Neighbor};
pub use train::{build_training_stream, train, TrainingMode, TrainingSource};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training stream has {tokens} tokens, below the minimum of {min}")]
    CorpusTooSmall { tokens: usize, min: usize },
    #[error("no term reaches min_count {0}; vocabulary is empty")]
    EmptyVocabulary(u64),
    #[error("training diverged: non-finite vector entries")]
    Diverged,
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    Cbow,
}

/// Hyperparameters for one training run. The defaults are the word2vec
/// options cbow=1, size=500, window=8, negative=25; the remaining fields
/// are not fixed by those options and carry the usual word2vec defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub architecture: Architecture,
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    pub subsample_t: f64,
    pub seed: u64,
    /// Streams shorter than this are refused (strict) or flagged (permissive).
    pub min_corpus_tokens: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Cbow,
            dim: 500,
            window: 8,
            negative: 25,
            epochs: 5,
            initial_lr: 0.05,
            min_count: 5,
            subsample_t: 1e-4,
            seed: 1,
            min_corpus_tokens: 1000,
        }
    }
}

impl TrainingConfig {
    /// Defaults for a single user's profile document: identical except that
    /// every term is kept (`min_count` 1).
    pub fn personalized() -> Self {
        Self {
            min_count: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return bad("initial_lr must be > 0");
        }
        if self.min_count == 0 {
            return bad("min_count must be >= 1");
        }
        if !(self.subsample_t.is_finite() && self.subsample_t >= 0.0) {
            return bad("subsample_t must be >= 0");
        }
        Ok(())
    }
}

/// What happened during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Tokens in the input stream, before vocabulary pruning.
    pub stream_tokens: usize,
    /// Set when the stream was below `min_corpus_tokens` in permissive mode.
    pub undertrained: bool,
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub examples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub term: String,
    pub count: u64,
}

/// Vocabulary with input (word) vectors and, when freshly trained, the
/// negative-sampling output weights. Row `i` of each table belongs to
/// `vocab[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vec<VocabEntry>,
    lookup: HashMap<String, usize>,
    dim: usize,
    input: Vec<f64>,
    output: Option<Vec<f64>>,
    norms: Vec<f64>,
    pub config: TrainingConfig,
    pub report: TrainingReport,
}

impl EmbeddingModel {
    /// Assemble a model from explicit vectors; `input.len()` must be
    /// `vocab.len() * dim`.
    pub fn from_parts(
        vocab: Vec<VocabEntry>,
        dim: usize,
        input: Vec<f64>,
        output: Option<Vec<f64>>,
        config: TrainingConfig,
        report: TrainingReport,
    ) -> Self {
        assert_eq!(input.len(), vocab.len() * dim, "input table shape");
        if let Some(out) = &output {
            assert_eq!(out.len(), vocab.len() * dim, "output table shape");
        }
        let lookup = vocab.iter().enumerate().map(|(i, v)| (v.term.clone(), i)).collect();
        let norms = input
            .chunks(dim.max(1))
            .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Self {
            vocab,
            lookup,
            dim,
            input,
            output,
            norms,
            config,
            report,
        }
    }

    /// Build from `(term, vector)` rows, e.g. hand-set toy vectors.
    pub fn from_vectors<S: Into<String>>(rows: Vec<(S, Vec<f64>)>) -> Self {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut vocab = Vec::with_capacity(rows.len());
        let mut input = Vec::with_capacity(rows.len() * dim);
        for (term, v) in rows {
            assert_eq!(v.len(), dim, "all rows need the same dimension");
            vocab.push(VocabEntry {
                term: term.into(),
                count: 0,
            });
            input.extend(v);
        }
        Self::from_parts(
            vocab,
            dim,
            input,
            None,
            TrainingConfig {
                dim,
                ..TrainingConfig::default()
            },
            TrainingReport::default(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[VocabEntry] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.lookup.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.lookup.contains_key(term)
    }

    /// The word vector of a term.
    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index_of(term).map(|i| self.row(i))
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_vectors(&self) -> Option<&[f64]> {
        self.output.as_deref()
    }

    pub fn is_undertrained(&self) -> bool {
        self.report.undertrained
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().all(|x| x.is_finite()) && self.output.iter().flatten().all(|x| x.is_finite())
    }
}

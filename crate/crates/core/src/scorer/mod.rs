//! Layer 2: text scoring.
//!
//! A [`Scorer`] maps normalized text to a [`HateScore`] in `[0, 1]`. Two
//! implementations ship: [`ReferenceScorer`], a hashed bag-of-words logistic
//! model that needs no ML runtime, and [`ExportedModelScorer`], which runs an
//! exported ONNX classifier.

mod exported;
mod reference;
mod tokenizer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{NormalizedText, DEFAULT_MAX_WORDS};

pub use exported::{
    load_exported_model, write_toy_artifact, ExportedModelScorer, InputNames, Manifest, SelfTestCase, ToyClassifier,
    MANIFEST_FILE, MANIFEST_SCHEMA_VERSION, SELF_TEST_FILE,
};
pub use reference::{feature_index, fit_reference, FitParams, ReferenceScorer, FEATURE_DIM};
pub use tokenizer::{TokenizerSpec, WordPieceTokenizer};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("model runtime failure: {0}")]
    Runtime(String),
    #[error("score {0} is not a finite value in [0, 1]")]
    OutOfRange(f64),
    #[error("training data needs both classes; found only {0}")]
    SingleClass(&'static str),
    #[error("model artifact not found at {0}")]
    NotFound(String),
    #[error("unsupported manifest schema version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("corrupt model artifact: {0}")]
    Corrupt(String),
    #[error("self-test mismatch on {text:?}: expected {expected}, got {actual}")]
    SelfTest { text: String, expected: f64, actual: f64 },
}

/// Probability-like hate score, finite and within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HateScore(f64);

impl HateScore {
    pub const ZERO: HateScore = HateScore(0.0);
    pub const ONE: HateScore = HateScore(1.0);

    pub fn new(value: f64) -> Result<Self, ScoreError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ScoreError::OutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Caps the score at `max`.
    pub fn min(self, max: f64) -> Self {
        Self(self.0.min(max))
    }
}

impl TryFrom<f64> for HateScore {
    type Error = ScoreError;
    fn try_from(v: f64) -> Result<Self, ScoreError> {
        Self::new(v)
    }
}

impl From<HateScore> for f64 {
    fn from(s: HateScore) -> f64 {
        s.0
    }
}

impl fmt::Display for HateScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Reference,
    ExportedModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub name: String,
    pub kind: ScorerKind,
    pub model_version: String,
    /// Longer inputs are truncated to this many words before scoring.
    pub max_input_words: usize,
}

impl ScorerDescriptor {
    pub fn new(name: impl Into<String>, kind: ScorerKind, model_version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            model_version: model_version.into(),
            max_input_words: DEFAULT_MAX_WORDS,
        }
    }
}

/// Thread-safe text scorer. Implementations are immutable after construction.
pub trait Scorer: Send + Sync {
    fn descriptor(&self) -> &ScorerDescriptor;

    fn score(&self, text: &NormalizedText) -> Result<HateScore, ScoreError>;

    /// Scores every text; failures are reported per position.
    fn score_batch(&self, texts: &[NormalizedText]) -> Vec<Result<HateScore, ScoreError>> {
        texts.iter().map(|t| self.score(t)).collect()
    }

    fn version(&self) -> &str {
        &self.descriptor().model_version
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn descriptor(&self) -> &ScorerDescriptor {
        (**self).descriptor()
    }
    fn score(&self, text: &NormalizedText) -> Result<HateScore, ScoreError> {
        (**self).score(text)
    }
    fn score_batch(&self, texts: &[NormalizedText]) -> Vec<Result<HateScore, ScoreError>> {
        (**self).score_batch(texts)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

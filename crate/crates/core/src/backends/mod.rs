//! Pluggable aspect-extraction and sentiment-classification backends.
//!
//! Three families ship with the harness:
//!
//! * [`lexicon`]: a deterministic keyword baseline that needs no model.
//! * [`replay`]: fixture files keyed by content hash, plus a recorder that
//!   wraps any backend and writes such fixtures.
//! * [`remote`]: a batching HTTP client for the inference service.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Polarity;
use crate::metrics::{normalize_term, NormConfig};

pub mod lexicon;
pub mod remote;
pub mod replay;

pub use lexicon::{LexiconBackend, LexiconConfig};
pub use remote::{RemoteBackend, RemoteEndpointConfig};
pub use replay::{record_wrap, FixtureRecord, FixtureSink, Recording, ReplayStore};

/// Class probabilities keyed by polarity.
pub type Scores = BTreeMap<Polarity, f64>;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend {backend} unavailable: {detail}")]
    Unavailable { backend: String, detail: String },
    #[error("protocol error: {detail} (body: {excerpt:?})")]
    Protocol { detail: String, excerpt: String },
    #[error("no {kind} fixture recorded for key {key}")]
    MissingFixture { kind: &'static str, key: String },
    #[error("fixture {path} line {line}: {detail}")]
    FixtureCorrupt { path: PathBuf, line: usize, detail: String },
    #[error("fixture {path}: duplicate key {key}")]
    DuplicateKey { path: PathBuf, key: String },
    #[error("term {term:?} does not occur in the text")]
    TermNotFound { term: String },
    #[error("backend returned an invalid result: {0}")]
    InvalidOutput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Output of one sentiment classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscPrediction {
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
}

impl AscPrediction {
    pub fn label(polarity: Polarity) -> Self {
        AscPrediction { polarity, scores: None }
    }

    pub fn one_hot(polarity: Polarity) -> Self {
        let scores = Polarity::PREDICTABLE.iter().map(|&p| (p, if p == polarity { 1.0 } else { 0.0 })).collect();
        AscPrediction { polarity, scores: Some(scores) }
    }

    /// Polarity must be one of the three predictable labels; scores, when
    /// present, must lie in [0, 1], sum to 1 within 1e-6 and peak at the label.
    pub fn validate(&self) -> Result<(), String> {
        if !self.polarity.is_predictable() {
            return Err(format!("polarity {} cannot be predicted", self.polarity));
        }
        let Some(scores) = &self.scores else { return Ok(()) };
        if let Some(p) = scores.keys().find(|p| !p.is_predictable()) {
            return Err(format!("score for non-predictable label {p}"));
        }
        if let Some((p, v)) = scores.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(format!("score {v} for {p} outside [0, 1]"));
        }
        let sum: f64 = scores.values().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("scores sum to {sum}"));
        }
        let top = scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        if scores.get(&self.polarity).copied() != Some(top) {
            return Err(format!("polarity {} is not the highest-scoring label", self.polarity));
        }
        Ok(())
    }
}

/// Aspect term extraction: text to candidate terms.
pub trait AteBackend: Send + Sync {
    fn id(&self) -> String;

    /// Backends that cannot take concurrent calls return true; the pipeline
    /// then serializes calls into them.
    fn single_flight(&self) -> bool {
        false
    }

    fn extract(&self, text: &str) -> Result<Vec<String>, BackendError>;
}

/// Aspect sentiment classification: (text, aspect term) to a polarity.
pub trait AscBackend: Send + Sync {
    fn id(&self) -> String;

    fn single_flight(&self) -> bool {
        false
    }

    fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError>;
}

macro_rules! forward_backend {
    ($ptr:ident) => {
        impl<T: AteBackend + ?Sized> AteBackend for $ptr<T> {
            fn id(&self) -> String {
                (**self).id()
            }
            fn single_flight(&self) -> bool {
                (**self).single_flight()
            }
            fn extract(&self, text: &str) -> Result<Vec<String>, BackendError> {
                (**self).extract(text)
            }
        }

        impl<T: AscBackend + ?Sized> AscBackend for $ptr<T> {
            fn id(&self) -> String {
                (**self).id()
            }
            fn single_flight(&self) -> bool {
                (**self).single_flight()
            }
            fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
                (**self).classify(text, term)
            }
        }
    };
}

forward_backend!(Box);
forward_backend!(Arc);

/// Fixture key for an extraction: SHA-256 of the UTF-8 text.
pub fn ate_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Fixture key for a classification: SHA-256 of text, NUL, normalized term.
pub fn asc_key(text: &str, term: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update(b"\0");
    hasher.update(normalize_term(term, &NormConfig::default()).as_bytes());
    hex::encode(hasher.finalize())
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..6])
}

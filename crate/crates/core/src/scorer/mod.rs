//! Scoring backends: per-token log-probabilities of a continuation given a
//! context (teacher forcing).
//!
//! Two backends ship: a deterministic byte-level bigram model for offline
//! runs and oracle tests, and an HTTP client speaking either the native
//! wire protocol or an OpenAI-compatible completions endpoint with echoed
//! log-probs. All log-probabilities are natural logs.

mod bigram;
mod http;

pub use bigram::BigramLm;
pub use http::{HttpScorer, ScoreProtocol};

use crate::error::{Error, Result};

/// A request to score `continuation` conditioned on `context`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConditionalScoreRequest {
    pub context: String,
    pub continuation: String,
}

/// Per-token log-probabilities of the continuation under the backend's own
/// tokenizer, each conditioned on the context plus the preceding
/// continuation tokens.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionalScoreResult {
    pub token_logprobs: Vec<f64>,
    pub token_count: u32,
}

impl ConditionalScoreResult {
    /// Check the result contract: at least one token, count matches, every
    /// entry a finite log of a probability.
    pub fn validate(&self) -> Result<()> {
        if self.token_logprobs.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        if self.token_count as usize != self.token_logprobs.len() {
            return Err(Error::backend(
                format!(
                    "token_count {} does not match {} returned log-probs",
                    self.token_count,
                    self.token_logprobs.len()
                ),
                false,
            ));
        }
        for (i, lp) in self.token_logprobs.iter().enumerate() {
            if !lp.is_finite() || *lp > 0.0 {
                return Err(Error::backend(
                    format!("token {i} has invalid log-prob {lp}"),
                    false,
                ));
            }
        }
        Ok(())
    }
}

/// Arithmetic mean of the per-token log-probs: the score a task contributes
/// to the zero-shot or one-shot vector.
pub fn mean_logprob(result: &ConditionalScoreResult) -> Result<f64> {
    result.validate()?;
    let sum: f64 = result.token_logprobs.iter().sum();
    Ok(sum / result.token_logprobs.len() as f64)
}

/// A backend that can score continuations. Implementations must be safe to
/// call concurrently.
pub trait ScorerBackend: Send + Sync {
    fn score(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult>;

    /// Stable identity of the backend (model, corpus, endpoint); part of
    /// every cache key so a backend change invalidates cached scores.
    fn fingerprint(&self) -> String;
}

impl<T: ScorerBackend + ?Sized> ScorerBackend for &T {
    fn score(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult> {
        (**self).score(request)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

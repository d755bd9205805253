//! Reward backends: one scalar quality score per rendered example.
//!
//! The real reward model lives behind a wire interface; a deterministic
//! stub ships for tests and offline runs. HTTP protocol:
//!
//! ```text
//! -> {"texts": ["...", "..."]}
//! <- {"scores": [0.42, -1.3]}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

/// A backend scoring each text with one finite scalar, order-preserving.
pub trait RewardBackend: Send + Sync {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>>;
    fn fingerprint(&self) -> String;
}

/// Deterministic stand-in for a reward model.
#[derive(Debug, Clone)]
pub enum StubReward {
    /// Every text gets the same score.
    Constant(f64),
    /// Score derived from the text's content hash, uniform in [0, 1).
    /// Deterministic across runs and platforms.
    ContentHash,
}

impl RewardBackend for StubReward {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        Ok(texts
            .iter()
            .map(|text| match self {
                StubReward::Constant(value) => *value,
                StubReward::ContentHash => content_hash_score(text),
            })
            .collect())
    }

    fn fingerprint(&self) -> String {
        match self {
            StubReward::Constant(value) => format!("reward-stub:constant={value}"),
            StubReward::ContentHash => "reward-stub:content-hash".into(),
        }
    }
}

fn content_hash_score(text: &str) -> f64 {
    let hex = sha256_hex(&[text.as_bytes()]);
    let bits = u64::from_str_radix(&hex[..16], 16).expect("hex digest");
    bits as f64 / (u64::MAX as f64 + 1.0)
}

pub struct HttpReward {
    endpoint: String,
    api_key: Option<String>,
    max_attempts: u32,
    client: reqwest::blocking::Client,
}

impl HttpReward {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpReward {
            endpoint: endpoint.into(),
            api_key: None,
            max_attempts: 3,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

impl RewardBackend for HttpReward {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        #[derive(Serialize)]
        struct RewardRequest<'a> {
            texts: &'a [String],
        }
        #[derive(Deserialize)]
        struct RewardResponse {
            scores: Vec<f64>,
        }

        let mut last_err = None;
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * (1 << (attempt - 1))));
            }
            let mut request = self
                .client
                .post(&self.endpoint)
                .json(&RewardRequest { texts });
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let parsed: RewardResponse = response.json().map_err(|e| {
                            Error::backend(format!("invalid reward response: {e}"), false)
                        })?;
                        if parsed.scores.len() != texts.len() {
                            return Err(Error::backend(
                                format!(
                                    "reward backend returned {} scores for {} texts",
                                    parsed.scores.len(),
                                    texts.len()
                                ),
                                false,
                            ));
                        }
                        if let Some(bad) = parsed.scores.iter().find(|s| !s.is_finite()) {
                            return Err(Error::backend(
                                format!("reward backend returned non-finite score {bad}"),
                                false,
                            ));
                        }
                        return Ok(parsed.scores);
                    }
                    let retryable = status.is_server_error();
                    let err = Error::backend(
                        format!("{} returned {status}", self.endpoint),
                        retryable,
                    );
                    if !retryable {
                        return Err(err);
                    }
                    last_err = Some(err);
                }
                Err(e) => {
                    last_err = Some(Error::backend(
                        format!("transport failure talking to {}: {e}", self.endpoint),
                        true,
                    ));
                }
            }
        }
        Err(last_err.unwrap_or_else(|| Error::backend("no attempts made", false)))
    }

    fn fingerprint(&self) -> String {
        format!("http-reward:{}", self.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::MockHttpServer;

    #[test]
    fn constant_stub_scores_everything_equally() {
        let stub = StubReward::Constant(0.5);
        let scores = stub
            .score_batch(&["a".into(), "b".into(), "c".into()])
            .unwrap();
        assert_eq!(scores, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn content_hash_stub_is_deterministic_and_bounded() {
        let stub = StubReward::ContentHash;
        let a = stub.score_batch(&["hello".into()]).unwrap();
        let b = stub.score_batch(&["hello".into()]).unwrap();
        assert_eq!(a, b);
        assert!(a[0] >= 0.0 && a[0] < 1.0);
        let c = stub.score_batch(&["world".into()]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn http_reward_round_trip() {
        let server = MockHttpServer::respond_with(r#"{"scores": [0.1, 0.9]}"#, 200, 1);
        let backend = HttpReward::new(server.url());
        let scores = backend.score_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(scores, vec![0.1, 0.9]);
        server.finish();
    }

    #[test]
    fn http_reward_rejects_non_finite_scores() {
        let server = MockHttpServer::respond_with(r#"{"scores": [1e999]}"#, 200, 1);
        let backend = HttpReward::new(server.url());
        assert!(backend.score_batch(&["a".into()]).is_err());
        server.finish();
    }
}

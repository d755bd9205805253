//! HTTP embedding client.
//!
//! Protocol, mirroring the scorer's native one:
//!
//! ```text
//! -> {"texts": ["...", "..."]}
//! <- {"vectors": [[0.1, ...], [0.2, ...]]}
//! ```
//!
//! Large inputs are chunked into batches; order is preserved.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::EmbedderBackend;

pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    batch_size: usize,
    api_key: Option<String>,
    max_attempts: u32,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            dim,
            batch_size: 512,
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

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn post_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        #[derive(Serialize)]
        struct EmbedRequest<'a> {
            texts: &'a [String],
        }
        #[derive(Deserialize)]
        struct EmbedResponse {
            vectors: Vec<Vec<f64>>,
        }

        let mut last_err = None;
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * (1 << (attempt - 1))));
            }
            let mut request = self.client.post(&self.endpoint).json(&EmbedRequest { texts });
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let parsed: EmbedResponse = response.json().map_err(|e| {
                            Error::backend(format!("invalid embedding response: {e}"), false)
                        })?;
                        if parsed.vectors.len() != texts.len() {
                            return Err(Error::backend(
                                format!(
                                    "embedding backend returned {} vectors for {} texts",
                                    parsed.vectors.len(),
                                    texts.len()
                                ),
                                false,
                            ));
                        }
                        return Ok(parsed.vectors);
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
}

impl EmbedderBackend for HttpEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            vectors.extend(self.post_batch(chunk)?);
        }
        Ok(vectors)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("http-embed:{}:dim={}", self.endpoint, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::embed;
    use crate::testutil::MockHttpServer;

    #[test]
    fn embeds_and_normalizes_over_the_wire() {
        let server =
            MockHttpServer::respond_with(r#"{"vectors": [[3.0, 4.0], [0.0, 2.0]]}"#, 200, 1);
        let backend = HttpEmbedder::new(server.url(), 2);
        let matrix = embed(&backend, &["a".into(), "b".into()]).unwrap();
        assert_eq!(matrix.rows[0].1, vec![0.6, 0.8]);
        assert_eq!(matrix.rows[1].1, vec![0.0, 1.0]);
        let seen = server.finish();
        assert!(seen[0].contains(r#""texts":["a","b"]"#));
    }

    #[test]
    fn chunks_large_batches() {
        let server = MockHttpServer::with_responses(vec![
            (200, r#"{"vectors": [[1.0, 0.0], [0.0, 1.0]]}"#.into()),
            (200, r#"{"vectors": [[1.0, 1.0]]}"#.into()),
        ]);
        let backend = HttpEmbedder::new(server.url(), 2).with_batch_size(2);
        let texts: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let vectors = backend.embed_raw(&texts).unwrap();
        assert_eq!(vectors.len(), 3);
        assert_eq!(server.finish().len(), 2);
    }

    #[test]
    fn count_mismatch_is_a_contract_error() {
        let server = MockHttpServer::respond_with(r#"{"vectors": [[1.0, 0.0]]}"#, 200, 1);
        let backend = HttpEmbedder::new(server.url(), 2);
        let err = backend
            .embed_raw(&["a".into(), "b".into()])
            .unwrap_err();
        assert!(matches!(err, Error::Backend { .. }));
        server.finish();
    }
}

//! HTTP scoring client.
//!
//! Two protocols are supported:
//!
//! **Native** — POST the request body to the endpoint and read the result
//! back, both as JSON:
//!
//! ```text
//! -> {"context": "...", "continuation": "..."}
//! <- {"token_logprobs": [-0.1, -2.3], "token_count": 2}
//! ```
//!
//! **OpenAI-compatible** — POST to `{endpoint}` (point it at
//! `/v1/completions`) with `prompt = context + continuation`, `echo = true`,
//! `logprobs = 0`, `max_tokens = 0`, and keep the echoed log-probs of the
//! tokens whose `text_offset` lies at or beyond the context length. If the
//! server's tokenizer fuses the last context byte with the first
//! continuation byte the boundary cannot be recovered and the call fails
//! with a contract error.
//!
//! Transport failures and 5xx responses are retried with exponential
//! backoff up to a bounded number of attempts.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ConditionalScoreRequest, ConditionalScoreResult, ScorerBackend};

/// Wire protocol spoken by an [`HttpScorer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreProtocol {
    #[default]
    Native,
    OpenAi,
}

pub struct HttpScorer {
    endpoint: String,
    protocol: ScoreProtocol,
    model: Option<String>,
    api_key: Option<String>,
    max_attempts: u32,
    client: reqwest::blocking::Client,
}

impl HttpScorer {
    pub fn new(endpoint: impl Into<String>, protocol: ScoreProtocol) -> Self {
        HttpScorer {
            endpoint: endpoint.into(),
            protocol,
            model: None,
            api_key: None,
            max_attempts: 3,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(&self, body: &B) -> Result<R> {
        let mut last_err = None;
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * (1 << (attempt - 1))));
            }
            let mut request = self.client.post(&self.endpoint).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json::<R>().map_err(|e| {
                            Error::backend(format!("invalid response body: {e}"), false)
                        });
                    }
                    let retryable = status.is_server_error();
                    let body = response.text().unwrap_or_default();
                    let err = Error::backend(
                        format!("{} returned {status}: {body}", self.endpoint),
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

    fn score_native(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult> {
        let result: ConditionalScoreResult = self.post_json(request)?;
        result.validate()?;
        Ok(result)
    }

    fn score_openai(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult> {
        #[derive(Serialize)]
        struct CompletionsRequest<'a> {
            #[serde(skip_serializing_if = "Option::is_none")]
            model: Option<&'a str>,
            prompt: String,
            max_tokens: u32,
            echo: bool,
            logprobs: u32,
            temperature: f32,
        }

        #[derive(Deserialize)]
        struct CompletionsResponse {
            choices: Vec<Choice>,
        }

        #[derive(Deserialize)]
        struct Choice {
            logprobs: Option<EchoLogprobs>,
        }

        #[derive(Deserialize)]
        struct EchoLogprobs {
            #[serde(default)]
            token_logprobs: Vec<Option<f64>>,
            #[serde(default)]
            text_offset: Vec<usize>,
        }

        let body = CompletionsRequest {
            model: self.model.as_deref(),
            prompt: format!("{}{}", request.context, request.continuation),
            max_tokens: 0,
            echo: true,
            logprobs: 0,
            temperature: 0.0,
        };
        let response: CompletionsResponse = self.post_json(&body)?;
        let logprobs = response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| Error::backend("completions response carries no logprobs", false))?;
        if logprobs.text_offset.len() != logprobs.token_logprobs.len() {
            return Err(Error::backend(
                "echoed logprobs and text offsets have different lengths",
                false,
            ));
        }

        let boundary = request.context.len();
        let mut token_logprobs = Vec::new();
        let mut first_offset = None;
        for (offset, lp) in logprobs.text_offset.iter().zip(&logprobs.token_logprobs) {
            if *offset < boundary {
                continue;
            }
            if first_offset.is_none() {
                first_offset = Some(*offset);
            }
            let lp = lp.ok_or_else(|| {
                Error::backend("null log-prob inside the continuation span", false)
            })?;
            token_logprobs.push(lp);
        }
        match first_offset {
            Some(offset) if offset == boundary => {}
            Some(offset) => {
                return Err(Error::backend(
                    format!(
                        "tokenizer split straddles the context boundary \
                         (first continuation token starts at {offset}, context ends at {boundary})"
                    ),
                    false,
                ))
            }
            None => return Err(Error::EmptyContinuation),
        }

        let result = ConditionalScoreResult {
            token_count: token_logprobs.len() as u32,
            token_logprobs,
        };
        result.validate()?;
        Ok(result)
    }
}

impl ScorerBackend for HttpScorer {
    fn score(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult> {
        if request.continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        match self.protocol {
            ScoreProtocol::Native => self.score_native(request),
            ScoreProtocol::OpenAi => self.score_openai(request),
        }
    }

    fn fingerprint(&self) -> String {
        let protocol = match self.protocol {
            ScoreProtocol::Native => "native",
            ScoreProtocol::OpenAi => "openai",
        };
        format!(
            "http:{protocol}:{}:{}",
            self.endpoint,
            self.model.as_deref().unwrap_or("-")
        )
    }
}

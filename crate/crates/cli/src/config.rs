//! Run configuration: TOML file, CLI-flag overrides, backend construction.
//!
//! Precedence is flags > file > defaults. All randomness downstream flows
//! from the single `seed` field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use prospector_core::embedder::{EmbedderBackend, HashingEmbedder, HttpEmbedder};
use prospector_core::error::{Error, Result};
use prospector_core::fingerprint::sha256_hex;
use prospector_core::refinement::RefinementConfig;
use prospector_core::reward::{HttpReward, RewardBackend, StubReward};
use prospector_core::scorer::{BigramLm, HttpScorer, ScoreProtocol, ScorerBackend};
use prospector_core::{DatasetFormat, PromptTemplate};

/// Environment variable holding the API key for HTTP backends.
pub const API_KEY_ENV: &str = "PROSPECTOR_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// `alpaca_json` or `jsonl`.
    pub format: String,
    pub cache_dir: PathBuf,
    pub parallelism: usize,
    pub seed: u64,
    pub template: PromptTemplate,
    pub scorer: ScorerConfig,
    pub reward: RewardConfig,
    pub embedder: EmbedderConfig,
    pub refinement: RefinementConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            format: "alpaca_json".into(),
            cache_dir: PathBuf::from(".prospector-cache"),
            parallelism: 1,
            seed: 0,
            template: PromptTemplate::default(),
            scorer: ScorerConfig::default(),
            reward: RewardConfig::default(),
            embedder: EmbedderConfig::default(),
            refinement: RefinementConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// `bigram`, `http`, or `openai`.
    pub kind: String,
    /// Training corpus for the bigram model; defaults to the dataset file.
    pub corpus: Option<PathBuf>,
    /// `full` (all 256 byte values) or `corpus` (bytes seen in the corpus).
    pub alphabet: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_attempts: u32,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            kind: "bigram".into(),
            corpus: None,
            alphabet: "full".into(),
            endpoint: None,
            model: None,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// `stub` or `http`.
    pub kind: String,
    /// Stub flavor: `content_hash` or `constant`.
    pub stub: String,
    pub constant: f64,
    pub endpoint: Option<String>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kind: "stub".into(),
            stub: "content_hash".into(),
            constant: 1.0,
            endpoint: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    /// `hashing` or `http`.
    pub kind: String,
    pub dim: usize,
    pub endpoint: Option<String>,
    pub batch_size: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: "hashing".into(),
            dim: 256,
            endpoint: None,
            batch_size: 512,
        }
    }
}

/// Flag-level overrides shared by the pipeline subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigArgs {
    /// Path to a TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Dataset file (overrides the config file).
    #[arg(long)]
    pub dataset: Option<PathBuf>,

    /// Dataset format: alpaca_json or jsonl.
    #[arg(long)]
    pub format: Option<String>,

    /// Directory for score caches and resume state.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,

    /// Concurrent scoring workers.
    #[arg(long)]
    pub parallelism: Option<usize>,

    /// Seed for all randomness in the run.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Forbid network backends; only built-in backends may run.
    #[arg(long)]
    pub offline: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str::<RunConfig>(&text).map_err(|e| {
                    Error::Config(format!("cannot parse {}: {e}", path.display()))
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(dataset) = &self.dataset {
            config.dataset = Some(dataset.clone());
        }
        if let Some(format) = &self.format {
            config.format = format.clone();
        }
        if let Some(cache_dir) = &self.cache_dir {
            config.cache_dir = cache_dir.clone();
        }
        if let Some(parallelism) = self.parallelism {
            config.parallelism = parallelism;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

impl RunConfig {
    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset configured (use --dataset or the config file)".into()))
    }

    pub fn dataset_format(&self) -> Result<DatasetFormat> {
        self.format.parse()
    }

    /// Check paths, sizes, and the template before any work starts.
    pub fn validate(&self, offline: bool) -> Result<()> {
        let dataset = self.dataset_path()?;
        if !dataset.exists() {
            return Err(Error::Config(format!(
                "dataset file {} does not exist",
                dataset.display()
            )));
        }
        self.dataset_format()?;
        if let Some(corpus) = &self.scorer.corpus {
            if !corpus.exists() {
                return Err(Error::Config(format!(
                    "scorer corpus {} does not exist",
                    corpus.display()
                )));
            }
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.refinement.elite_size >= self.refinement.pool_size {
            return Err(Error::Config(format!(
                "elite_size {} must be smaller than pool_size {}",
                self.refinement.elite_size, self.refinement.pool_size
            )));
        }
        if self.refinement.coreset_size > self.refinement.pool_size - self.refinement.elite_size {
            return Err(Error::Config(format!(
                "coreset_size {} exceeds pool_size - elite_size = {}",
                self.refinement.coreset_size,
                self.refinement.pool_size - self.refinement.elite_size
            )));
        }
        self.template.validate()?;
        if offline {
            for (name, kind) in [
                ("scorer", self.scorer.kind.as_str()),
                ("reward", self.reward.kind.as_str()),
                ("embedder", self.embedder.kind.as_str()),
            ] {
                if kind != "bigram" && kind != "stub" && kind != "hashing" {
                    return Err(Error::Config(format!(
                        "--offline forbids the {kind:?} {name} backend"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hash of the resolved configuration, recorded in run manifests.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(&[canonical.as_bytes()])
    }

    pub fn build_scorer(&self) -> Result<Box<dyn ScorerBackend>> {
        match self.scorer.kind.as_str() {
            "bigram" => {
                let corpus_path = match &self.scorer.corpus {
                    Some(path) => path.clone(),
                    None => self.dataset_path()?.to_path_buf(),
                };
                let corpus = std::fs::read(&corpus_path)?;
                let lm = match self.scorer.alphabet.as_str() {
                    "full" => BigramLm::train(&corpus),
                    "corpus" => BigramLm::train_with_alphabet(&corpus, &corpus)?,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown bigram alphabet mode {other:?} (expected \"full\" or \"corpus\")"
                        )))
                    }
                };
                Ok(Box::new(lm))
            }
            "http" | "openai" => {
                let endpoint = self.scorer.endpoint.as_ref().ok_or_else(|| {
                    Error::Config("scorer.endpoint is required for http backends".into())
                })?;
                let protocol = if self.scorer.kind == "openai" {
                    ScoreProtocol::OpenAi
                } else {
                    ScoreProtocol::Native
                };
                let mut scorer = HttpScorer::new(endpoint.clone(), protocol)
                    .with_api_key(std::env::var(API_KEY_ENV).ok())
                    .with_max_attempts(self.scorer.max_attempts);
                if let Some(model) = &self.scorer.model {
                    scorer = scorer.with_model(model.clone());
                }
                Ok(Box::new(scorer))
            }
            other => Err(Error::Config(format!(
                "unknown scorer kind {other:?} (expected bigram, http, or openai)"
            ))),
        }
    }

    pub fn build_reward(&self) -> Result<Box<dyn RewardBackend>> {
        match self.reward.kind.as_str() {
            "stub" => match self.reward.stub.as_str() {
                "content_hash" => Ok(Box::new(StubReward::ContentHash)),
                "constant" => Ok(Box::new(StubReward::Constant(self.reward.constant))),
                other => Err(Error::Config(format!(
                    "unknown reward stub {other:?} (expected content_hash or constant)"
                ))),
            },
            "http" => {
                let endpoint = self.reward.endpoint.as_ref().ok_or_else(|| {
                    Error::Config("reward.endpoint is required for the http backend".into())
                })?;
                Ok(Box::new(
                    HttpReward::new(endpoint.clone()).with_api_key(std::env::var(API_KEY_ENV).ok()),
                ))
            }
            other => Err(Error::Config(format!(
                "unknown reward kind {other:?} (expected stub or http)"
            ))),
        }
    }

    pub fn build_embedder(&self) -> Result<Box<dyn EmbedderBackend>> {
        match self.embedder.kind.as_str() {
            "hashing" => Ok(Box::new(HashingEmbedder::new(self.embedder.dim))),
            "http" => {
                let endpoint = self.embedder.endpoint.as_ref().ok_or_else(|| {
                    Error::Config("embedder.endpoint is required for the http backend".into())
                })?;
                Ok(Box::new(
                    HttpEmbedder::new(endpoint.clone(), self.embedder.dim)
                        .with_api_key(std::env::var(API_KEY_ENV).ok())
                        .with_batch_size(self.embedder.batch_size),
                ))
            }
            other => Err(Error::Config(format!(
                "unknown embedder kind {other:?} (expected hashing or http)"
            ))),
        }
    }
}

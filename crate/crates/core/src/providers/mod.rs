//! Clients for the embedding and generation services, with offline mocks.

mod embedding;
mod generation;
mod transport;

pub use embedding::{
    CachedEmbedder, EmbeddingProvider, EmbeddingVector, HashingEmbedder, HttpEmbeddingProvider, DEFAULT_EMBED_MODEL,
    EMBED_KEY_ENV,
};
pub use generation::{
    generate, postprocess, ConstantGenerator, EchoGenerator, GenerationConfig, GenerationRequest, Generator,
    HttpGenerator, GEN_KEY_ENV,
};
pub use transport::{
    real_sleeper, with_retries, HttpTransport, InflightLimiter, RetryPolicy, Sleeper, Transport, TransportError,
};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable after {attempts} attempt(s): {last}")]
    Unavailable { attempts: u32, last: String },
    #[error("generation was empty after post-processing")]
    EmptyGeneration,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
    #[error("empty input")]
    EmptyInput,
    #[error("embedding cache: {0}")]
    Cache(String),
}

/// Provider configuration, keyed the same way as the config file
/// (`embed.endpoint`, `gen.model`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    #[serde(rename = "embed.endpoint")]
    pub embed_endpoint: Option<String>,
    #[serde(rename = "embed.model")]
    pub embed_model: String,
    #[serde(rename = "embed.dimension")]
    pub embed_dimension: Option<usize>,
    #[serde(rename = "gen.endpoint")]
    pub gen_endpoint: Option<String>,
    #[serde(rename = "gen.model")]
    pub gen_model: String,
    #[serde(rename = "gen.temperature")]
    pub gen_temperature: f64,
    #[serde(rename = "gen.max_tokens")]
    pub gen_max_tokens: u32,
    #[serde(rename = "concurrency.inflight")]
    pub inflight: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

/// Vector size of the offline hashing embedder when none is configured.
pub const MOCK_DIMENSION: usize = 256;

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            embed_endpoint: None,
            embed_model: DEFAULT_EMBED_MODEL.into(),
            embed_dimension: None,
            gen_endpoint: None,
            gen_model: "gpt-4o-mini".into(),
            gen_temperature: 0.0,
            gen_max_tokens: 128,
            inflight: 4,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl ProviderSettings {
    /// Sets one config key from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ProviderError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ProviderError> {
            v.parse()
                .map_err(|_| ProviderError::Config(format!("invalid value for {key}: {v:?}")))
        }
        match key {
            "embed.endpoint" => self.embed_endpoint = Some(value.to_string()),
            "embed.model" => self.embed_model = value.to_string(),
            "embed.dimension" => self.embed_dimension = Some(parse(key, value)?),
            "gen.endpoint" => self.gen_endpoint = Some(value.to_string()),
            "gen.model" => self.gen_model = value.to_string(),
            "gen.temperature" => self.gen_temperature = parse(key, value)?,
            "gen.max_tokens" => self.gen_max_tokens = parse(key, value)?,
            "concurrency.inflight" => self.inflight = parse(key, value)?,
            _ => return Err(ProviderError::Config(format!("unknown config key {key}"))),
        }
        Ok(())
    }

    pub fn limiter(&self) -> Arc<InflightLimiter> {
        Arc::new(InflightLimiter::new(self.inflight))
    }

    fn transport(&self) -> Result<Arc<dyn Transport>, ProviderError> {
        Ok(Arc::new(HttpTransport::new(Duration::from_secs(self.timeout_secs))?))
    }

    /// The configured embedder; no endpoint or `mock` selects the hashing embedder.
    pub fn embedder(&self, limiter: Arc<InflightLimiter>) -> Result<CachedEmbedder, ProviderError> {
        let provider: Box<dyn EmbeddingProvider> = match self.embed_endpoint.as_deref() {
            None | Some("mock") => Box::new(HashingEmbedder::new(self.embed_dimension.unwrap_or(MOCK_DIMENSION))),
            Some(url) => Box::new(HttpEmbeddingProvider::new(
                url,
                self.embed_model.clone(),
                self.transport()?,
                self.retry,
                real_sleeper(),
                limiter,
            )),
        };
        let cached = CachedEmbedder::new(provider);
        Ok(match self.embed_dimension {
            Some(d) => cached.with_dimension(d),
            None => cached,
        })
    }

    pub fn generation_config(&self) -> Result<GenerationConfig, ProviderError> {
        let endpoint = self
            .gen_endpoint
            .clone()
            .ok_or_else(|| ProviderError::Config("gen.endpoint is not set".into()))?;
        Ok(GenerationConfig {
            endpoint,
            model: self.gen_model.clone(),
            temperature: self.gen_temperature,
            max_tokens: self.gen_max_tokens,
            retry: self.retry,
        })
    }

    pub fn http_generator(&self, limiter: Arc<InflightLimiter>) -> Result<HttpGenerator, ProviderError> {
        HttpGenerator::new(self.generation_config()?, self.transport()?, real_sleeper(), limiter)
    }
}

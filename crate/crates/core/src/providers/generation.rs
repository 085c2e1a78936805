//! Message generation: the chat-completion client, offline mocks, and the
//! output post-processing shared by all of them.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::providers::transport::{with_retries, InflightLimiter, RetryPolicy, Sleeper, Transport};
use crate::providers::ProviderError;

pub const GEN_KEY_ENV: &str = "CORACMG_GEN_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_max_tokens() -> u32 {
    128
}

impl GenerationConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        GenerationConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.retry.max_attempts < 1 {
            return Err(ProviderError::Config("retry.max_attempts must be at least 1".into()));
        }
        if self.endpoint.is_empty() {
            return Err(ProviderError::Config("generation endpoint is not set".into()));
        }
        Ok(())
    }

    /// Experiments run greedy decoding only.
    pub fn validate_for_experiment(&self) -> Result<(), ProviderError> {
        self.validate()?;
        if self.temperature != 0.0 {
            return Err(ProviderError::Config(format!(
                "experiment mode requires temperature 0.0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// What a generator sees for one query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// Messages of the retrieved examples, most relevant first.
    pub example_messages: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            example_messages: Vec::new(),
        }
    }
}

pub trait Generator: Send + Sync {
    /// Raw model output, before post-processing.
    fn complete(&self, request: &GenerationRequest) -> Result<String, ProviderError>;

    fn id(&self) -> String;

    fn network_calls(&self) -> usize {
        0
    }
}

/// Generates via [`Generator::complete`] and post-processes the output.
pub fn generate(generator: &dyn Generator, request: &GenerationRequest) -> Result<String, ProviderError> {
    if request.prompt.trim().is_empty() {
        return Err(ProviderError::EmptyInput);
    }
    let raw = generator.complete(request)?;
    postprocess(&raw).ok_or(ProviderError::EmptyGeneration)
}

static FENCE_LINE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\s*(```|~~~)").unwrap());
static FENCE: Lazy<Regex> = Lazy::new(|| Regex::new(r"```+|~~~+").unwrap());

/// First non-empty line outside fence markers, with surrounding quotes and
/// backticks removed. `None` if nothing is left.
pub fn postprocess(raw: &str) -> Option<String> {
    let line = raw
        .split(['\n', '\r'])
        .filter(|l| !FENCE_LINE.is_match(l))
        .map(|l| FENCE.replace_all(l, "").trim().to_string())
        .find(|l| !l.is_empty())?;
    let stripped = strip_wrapping(&line);
    (!stripped.is_empty()).then_some(stripped)
}

fn strip_wrapping(line: &str) -> String {
    let mut s = line.trim();
    loop {
        let pairs = [('"', '"'), ('\'', '\''), ('`', '`'), ('“', '”')];
        let before = s;
        for (open, close) in pairs {
            if s.len() >= open.len_utf8() + close.len_utf8() && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            }
        }
        if s == before {
            break;
        }
    }
    s.to_string()
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpGenerator {
    config: GenerationConfig,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    sleep: Sleeper,
    limiter: Arc<InflightLimiter>,
    calls: AtomicUsize,
}

impl HttpGenerator {
    pub fn new(
        config: GenerationConfig,
        transport: Arc<dyn Transport>,
        sleep: Sleeper,
        limiter: Arc<InflightLimiter>,
    ) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(HttpGenerator {
            config,
            api_key: std::env::var(GEN_KEY_ENV).ok(),
            transport,
            sleep,
            limiter,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }
}

fn parse_completion(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.pointer("/choices/0/text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl Generator for HttpGenerator {
    fn complete(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let body = self.request_body(&request.prompt);
        let resp = with_retries(&self.config.retry, &self.sleep, || {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.limiter.run(|| {
                self.transport
                    .post_json(&self.config.endpoint, self.api_key.as_deref(), &body)
            })
        })?;
        parse_completion(&resp).ok_or_else(|| ProviderError::InvalidResponse("no completion text in response".into()))
    }

    fn id(&self) -> String {
        self.config.model.clone()
    }

    fn network_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Returns the most relevant retrieved message unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoGenerator;

impl Generator for EchoGenerator {
    fn complete(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        request
            .example_messages
            .first()
            .cloned()
            .ok_or(ProviderError::EmptyGeneration)
    }

    fn id(&self) -> String {
        "echo-mock".into()
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct ConstantGenerator(pub String);

impl Generator for ConstantGenerator {
    fn complete(&self, _: &GenerationRequest) -> Result<String, ProviderError> {
        Ok(self.0.clone())
    }

    fn id(&self) -> String {
        format!("constant:{}", self.0)
    }
}

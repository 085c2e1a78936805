//! Dense embeddings: provider clients, the offline hashing mock, and a
//! content-addressed cache that normalizes every vector to unit length.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::providers::transport::{with_retries, InflightLimiter, RetryPolicy, Sleeper, Transport};
use crate::providers::ProviderError;
use crate::scalar::Scalar;
use crate::tokenizer::tokenize;

pub const EMBED_KEY_ENV: &str = "CORACMG_EMBED_KEY";
pub const DEFAULT_EMBED_MODEL: &str = "jina-embeddings-v2-base-code";

/// A unit-length dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Scales `raw` to unit Euclidean norm.
    pub fn normalized(raw: Vec<T>) -> Result<Self, ProviderError> {
        if raw.is_empty() {
            return Err(ProviderError::InvalidResponse("empty embedding".into()));
        }
        let norm = raw.iter().map(|x| *x * *x).sum::<T>().sqrt();
        if !norm.is_finite() || norm == T::zero() {
            return Err(ProviderError::InvalidResponse(
                "embedding has zero or non-finite norm".into(),
            ));
        }
        Ok(EmbeddingVector {
            values: raw.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|x| *x * *x).sum::<T>().sqrt()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Source of raw (not necessarily normalized) embedding vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, ProviderError>;

    /// Identifier recorded in index manifests.
    fn model_id(&self) -> String;

    /// Requests that left the process so far.
    fn network_calls(&self) -> usize {
        0
    }
}

/// Feature-hashing embedder: tokens are hashed into signed buckets.
/// Deterministic, offline, and content-sensitive, so near-duplicate diffs
/// get nearby vectors.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        HashingEmbedder { dimension }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text).iter() {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        // Keeps the vector non-zero even if token signs cancel.
        let h = fnv1a(text.as_bytes());
        v[(h % self.dimension as u64) as usize] += 1e-3;
        Ok(v)
    }

    fn model_id(&self) -> String {
        format!("hashing-{}", self.dimension)
    }
}

/// OpenAI-compatible `/embeddings` client.
pub struct HttpEmbeddingProvider {
    pub endpoint: String,
    pub model: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    sleep: Sleeper,
    limiter: Arc<InflightLimiter>,
    calls: AtomicUsize,
}

impl HttpEmbeddingProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        transport: Arc<dyn Transport>,
        retry: RetryPolicy,
        sleep: Sleeper,
        limiter: Arc<InflightLimiter>,
    ) -> Self {
        HttpEmbeddingProvider {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(EMBED_KEY_ENV).ok(),
            transport,
            retry,
            sleep,
            limiter,
            calls: AtomicUsize::new(0),
        }
    }
}

fn parse_embedding(v: &Value) -> Option<Vec<f64>> {
    let arr = v
        .pointer("/data/0/embedding")
        .or_else(|| v.pointer("/embeddings/0"))
        .or_else(|| v.get("embedding"))?
        .as_array()?;
    arr.iter().map(Value::as_f64).collect()
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let body = json!({ "model": self.model, "input": [text] });
        let resp = with_retries(&self.retry, &self.sleep, || {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.limiter
                .run(|| self.transport.post_json(&self.endpoint, self.api_key.as_deref(), &body))
        })?;
        parse_embedding(&resp).ok_or_else(|| ProviderError::InvalidResponse("no embedding array in response".into()))
    }

    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn network_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    vector: Vec<f64>,
}

/// Wraps a provider with normalization, a dimension check and a cache
/// keyed by the SHA-256 of the input text.
pub struct CachedEmbedder {
    provider: Box<dyn EmbeddingProvider>,
    cache: RwLock<HashMap<String, Arc<Vec<f64>>>>,
    dimension: RwLock<Option<usize>>,
    provider_calls: AtomicUsize,
}

impl CachedEmbedder {
    pub fn new(provider: Box<dyn EmbeddingProvider>) -> Self {
        CachedEmbedder {
            provider,
            cache: RwLock::new(HashMap::new()),
            dimension: RwLock::new(None),
            provider_calls: AtomicUsize::new(0),
        }
    }

    /// Fixes the expected dimension; mismatching vectors are rejected.
    pub fn with_dimension(self, dimension: usize) -> Self {
        *self.dimension.write().unwrap() = Some(dimension);
        self
    }

    pub fn content_key(text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn model_id(&self) -> String {
        self.provider.model_id()
    }

    pub fn dimension(&self) -> Option<usize> {
        *self.dimension.read().unwrap()
    }

    /// Times the wrapped provider was asked for a vector (cache misses).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn network_calls(&self) -> usize {
        self.provider.network_calls()
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn embed<T: Scalar>(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        let raw = self.embed_cached(text)?;
        EmbeddingVector::normalized(raw.iter().map(|x| T::lit(*x)).collect())
    }

    fn embed_cached(&self, text: &str) -> Result<Arc<Vec<f64>>, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let key = Self::content_key(text);
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        self.provider_calls.fetch_add(1, Ordering::SeqCst);
        let raw = self.provider.embed_raw(text)?;
        let unit = EmbeddingVector::<f64>::normalized(raw)?.into_values();
        {
            let mut dim = self.dimension.write().unwrap();
            match *dim {
                Some(d) if d != unit.len() => {
                    return Err(ProviderError::DimensionMismatch {
                        expected: d,
                        got: unit.len(),
                    })
                }
                None => *dim = Some(unit.len()),
                _ => {}
            }
        }
        let unit = Arc::new(unit);
        let mut cache = self.cache.write().unwrap();
        Ok(cache.entry(key).or_insert(unit).clone())
    }

    /// Loads a cache file written by [`save`](Self::save); missing files are ignored.
    pub fn load(&self, path: &Path) -> Result<usize, ProviderError> {
        if !path.exists() {
            return Ok(0);
        }
        let lines: Vec<CacheLine> = crate::jsonl::read(path).map_err(|e| ProviderError::Cache(e.to_string()))?;
        let n = lines.len();
        let mut cache = self.cache.write().unwrap();
        for line in lines {
            cache.insert(line.key, Arc::new(line.vector));
        }
        Ok(n)
    }

    /// Writes the cache sorted by key, so identical contents give identical files.
    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        let cache = self.cache.read().unwrap();
        let mut lines: Vec<CacheLine> = cache
            .iter()
            .map(|(k, v)| CacheLine {
                key: k.clone(),
                vector: v.as_ref().clone(),
            })
            .collect();
        lines.sort_by(|a, b| a.key.cmp(&b.key));
        crate::jsonl::write(path, &lines).map_err(|e| ProviderError::Cache(e.to_string()))
    }
}

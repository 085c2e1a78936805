//! JSON-over-HTTP plumbing shared by both provider clients.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::providers::ProviderError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    /// Worth retrying (timeouts, connection errors, 429 and 5xx).
    pub transient: bool,
}

impl TransportError {
    pub fn transient(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            transient: true,
        }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            transient: false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(format!("http client: {e}")))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::transient(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            let msg = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                TransportError::transient(msg)
            } else {
                TransportError::permanent(msg)
            });
        }
        resp.json::<Value>()
            .map_err(|e| TransportError::permanent(format!("invalid JSON response: {e}")))
    }
}

/// Exponential backoff: `initial`, `initial * multiplier`, ...
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 1000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(retry as i32);
        Duration::from_millis(ms.round() as u64)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub fn real_sleeper() -> Sleeper {
    Arc::new(std::thread::sleep)
}

/// Runs `op` until it succeeds, fails permanently, or the attempts run out.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    sleep: &Sleeper,
    mut op: impl FnMut() -> Result<T, TransportError>,
) -> Result<T, ProviderError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!("provider attempt {}/{} failed: {}", attempt + 1, attempts, e.message);
                last = e.message;
                if !e.transient {
                    return Err(ProviderError::Unavailable {
                        attempts: attempt + 1,
                        last,
                    });
                }
                if attempt + 1 < attempts {
                    sleep(policy.backoff(attempt));
                }
            }
        }
    }
    Err(ProviderError::Unavailable { attempts, last })
}

/// Counting semaphore bounding concurrent provider requests.
#[derive(Debug)]
pub struct InflightLimiter {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

impl InflightLimiter {
    pub fn new(max: usize) -> Self {
        InflightLimiter {
            max: max.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut cur = self.current.lock().unwrap();
            while *cur >= self.max {
                cur = self.freed.wait(cur).unwrap();
            }
            *cur += 1;
        }
        struct Release<'a>(&'a InflightLimiter);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                *self.0.current.lock().unwrap() -= 1;
                self.0.freed.notify_one();
            }
        }
        let _release = Release(self);
        f()
    }
}

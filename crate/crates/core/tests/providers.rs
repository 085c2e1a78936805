use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use commitrag::providers::{
    generate, postprocess, CachedEmbedder, EmbeddingProvider, EmbeddingVector, GenerationConfig, GenerationRequest,
    Generator, HashingEmbedder, HttpEmbeddingProvider, HttpGenerator, InflightLimiter, ProviderError, RetryPolicy,
    Sleeper, Transport, TransportError,
};
use proptest::prelude::*;
use serde_json::{json, Value};

/// Replays canned responses and records every request.
struct Scripted {
    replies: Mutex<VecDeque<Result<Value, TransportError>>>,
    seen: Mutex<Vec<Value>>,
}

impl Scripted {
    fn new(replies: Vec<Result<Value, TransportError>>) -> Arc<Self> {
        Arc::new(Scripted {
            replies: Mutex::new(replies.into()),
            seen: Mutex::new(Vec::new()),
        })
    }
}

impl Transport for Scripted {
    fn post_json(&self, _url: &str, _bearer: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        self.seen.lock().unwrap().push(body.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::permanent("script exhausted")))
    }
}

fn recording_sleeper() -> (Sleeper, Arc<Mutex<Vec<Duration>>>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let l = log.clone();
    (Arc::new(move |d| l.lock().unwrap().push(d)), log)
}

fn chat(content: &str) -> Value {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] })
}

fn generator(transport: Arc<Scripted>, sleep: Sleeper) -> HttpGenerator {
    let cfg = GenerationConfig::new("http://localhost/v1/chat/completions", "test-model");
    HttpGenerator::new(cfg, transport, sleep, Arc::new(InflightLimiter::new(2))).unwrap()
}

#[test]
fn transient_failures_back_off_then_succeed() {
    let t = Scripted::new(vec![
        Err(TransportError::transient("HTTP 503")),
        Err(TransportError::transient("timeout")),
        Ok(chat("```\nFix parser crash\n```")),
    ]);
    let (sleep, slept) = recording_sleeper();
    let g = generator(t.clone(), sleep);
    let out = generate(&g, &GenerationRequest::new("diff")).unwrap();
    assert_eq!(out, "Fix parser crash");
    assert_eq!(g.network_calls(), 3);
    assert_eq!(*slept.lock().unwrap(), [Duration::from_secs(1), Duration::from_secs(2)]);

    let body = &t.seen.lock().unwrap()[0];
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["content"], "diff");
}

#[test]
fn retries_are_bounded_and_permanent_errors_stop_early() {
    let t = Scripted::new((0..5).map(|_| Err(TransportError::transient("HTTP 500"))).collect());
    let (sleep, slept) = recording_sleeper();
    let g = generator(t, sleep);
    match generate(&g, &GenerationRequest::new("d")) {
        Err(ProviderError::Unavailable { attempts, last }) => {
            assert_eq!(attempts, 3);
            assert_eq!(last, "HTTP 500");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(slept.lock().unwrap().len(), 2);

    let t = Scripted::new(vec![Err(TransportError::permanent("HTTP 401"))]);
    let (sleep, slept) = recording_sleeper();
    let g = generator(t, sleep);
    assert!(matches!(
        generate(&g, &GenerationRequest::new("d")),
        Err(ProviderError::Unavailable { attempts: 1, .. })
    ));
    assert!(slept.lock().unwrap().is_empty());
}

#[test]
fn empty_or_malformed_completions() {
    let t = Scripted::new(vec![Ok(chat("```\n\n```")), Ok(json!({ "unexpected": true }))]);
    let (sleep, _) = recording_sleeper();
    let g = generator(t, sleep);
    assert!(matches!(
        generate(&g, &GenerationRequest::new("d")),
        Err(ProviderError::EmptyGeneration)
    ));
    assert!(matches!(
        generate(&g, &GenerationRequest::new("d")),
        Err(ProviderError::InvalidResponse(_))
    ));
    assert!(matches!(
        generate(&g, &GenerationRequest::new("")),
        Err(ProviderError::EmptyInput)
    ));
}

#[test]
fn nonzero_temperature_rejected_for_experiments() {
    let mut cfg = GenerationConfig::new("http://x", "m");
    cfg.temperature = 0.7;
    assert!(cfg.validate().is_ok());
    assert!(matches!(cfg.validate_for_experiment(), Err(ProviderError::Config(_))));
}

#[test]
fn http_embeddings_are_cached_by_content() {
    let reply = || Ok(json!({ "data": [{ "embedding": [3.0, 4.0] }] }));
    let t = Scripted::new(vec![reply(), reply()]);
    let (sleep, _) = recording_sleeper();
    let provider = HttpEmbeddingProvider::new(
        "http://localhost/v1/embeddings",
        "embed-model",
        t.clone(),
        RetryPolicy::default(),
        sleep,
        Arc::new(InflightLimiter::new(1)),
    );
    let e = CachedEmbedder::new(Box::new(provider));
    let v = e.embed::<f64>("some diff").unwrap();
    assert_eq!(v.values(), [0.6, 0.8]);
    e.embed::<f64>("some diff").unwrap();
    assert_eq!((e.provider_calls(), e.network_calls()), (1, 1));
    assert_eq!(
        t.seen.lock().unwrap()[0],
        json!({ "model": "embed-model", "input": ["some diff"] })
    );
    e.embed::<f64>("other").unwrap();
    assert_eq!(e.provider_calls(), 2);
    assert_eq!(e.model_id(), "embed-model");
}

struct Wobbly(AtomicUsize);

impl EmbeddingProvider for Wobbly {
    fn embed_raw(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
        let n = self.0.fetch_add(1, Ordering::SeqCst);
        Ok(vec![1.0; 3 + n])
    }
    fn model_id(&self) -> String {
        "wobbly".into()
    }
}

#[test]
fn dimension_changes_are_rejected() {
    let e = CachedEmbedder::new(Box::new(Wobbly(AtomicUsize::new(0))));
    e.embed::<f64>("a").unwrap();
    assert!(matches!(
        e.embed::<f64>("b"),
        Err(ProviderError::DimensionMismatch { expected: 3, got: 4 })
    ));
    assert!(matches!(e.embed::<f64>(""), Err(ProviderError::EmptyInput)));
}

#[test]
fn cache_persists_across_instances() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let a = CachedEmbedder::new(Box::new(HashingEmbedder::new(32)));
    let texts = ["alpha beta", "gamma", "delta epsilon zeta"];
    let before: Vec<Vec<f64>> = texts.iter().map(|t| a.embed::<f64>(t).unwrap().into_values()).collect();
    a.save(&path).unwrap();

    let b = CachedEmbedder::new(Box::new(HashingEmbedder::new(32)));
    assert_eq!(b.load(&path).unwrap(), 3);
    let after: Vec<Vec<f64>> = texts.iter().map(|t| b.embed::<f64>(t).unwrap().into_values()).collect();
    assert_eq!(before, after);
    assert_eq!(b.provider_calls(), 0);
    assert_eq!(b.network_calls(), 0);
}

#[test]
fn inflight_limit_is_respected() {
    let limiter = Arc::new(InflightLimiter::new(2));
    let (now, peak) = (Arc::new(AtomicUsize::new(0)), Arc::new(AtomicUsize::new(0)));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let (l, now, peak) = (limiter.clone(), now.clone(), peak.clone());
            std::thread::spawn(move || {
                l.run(|| {
                    let n = now.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(n, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    now.fetch_sub(1, Ordering::SeqCst);
                })
            })
        })
        .collect();
    handles.into_iter().for_each(|h| h.join().unwrap());
    assert!(peak.load(Ordering::SeqCst) <= 2);
}

proptest! {
    #[test]
    fn postprocess_yields_one_clean_line(raw in "(```[a-z]{0,4}\n)?[ -~\n]{0,80}(\n```)?") {
        if let Some(line) = postprocess(&raw) {
            prop_assert!(!line.contains('\n') && !line.contains('\r'));
            prop_assert!(!line.contains("```"));
            prop_assert!(!line.is_empty());
            prop_assert_eq!(line.trim(), line.as_str());
        }
    }

    #[test]
    fn embeddings_have_unit_norm(raw in proptest::collection::vec(-1e3f64..1e3, 1..64)) {
        prop_assume!(raw.iter().any(|x| x.abs() > 1e-6));
        let v = EmbeddingVector::<f64>::normalized(raw).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hashing_embedder_is_deterministic(text in "[a-zA-Z ]{1,40}") {
        prop_assume!(!text.trim().is_empty());
        let a = CachedEmbedder::new(Box::new(HashingEmbedder::new(16)));
        let b = CachedEmbedder::new(Box::new(HashingEmbedder::new(16)));
        let (x, y) = (a.embed::<f64>(&text).unwrap(), b.embed::<f64>(&text).unwrap());
        prop_assert_eq!(x.values(), y.values());
        prop_assert!((x.norm() - 1.0).abs() < 1e-9);
    }
}

//! Provider-agnostic chat-completion gateway.
//!
//! Every request is identified by a digest of its canonical serialization and
//! answered from a content-addressed file cache when possible. A warm cache
//! makes the whole pipeline a pure function: zero provider calls, identical
//! bytes. The scripted mock provider is first-class so the pipeline runs at
//! desk scale with no network at all.

mod cache;
mod provider;

pub use cache::ResponseCache;
pub use provider::{
    GeminiProvider, MockProvider, MockScript, OpenAiProvider, Provider, ProviderError,
    ProviderResponse,
};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider retries exhausted after {attempts} attempts: {last}")]
    ProviderExhausted { attempts: u32, last: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    Truncated,
    Refused,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Pipeline stage label; not part of the request identity.
    pub request_tag: String,
}

impl LlmRequest {
    pub fn new(model_id: &str, user_prompt: &str, tag: &str) -> LlmRequest {
        LlmRequest {
            model_id: model_id.to_string(),
            system_prompt: None,
            user_prompt: user_prompt.to_string(),
            max_output_tokens: 4096,
            temperature: 0.0,
            request_tag: tag.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub from_cache: bool,
}

/// Stable 256-bit identity of a request.
///
/// The digest covers (model_id, system_prompt, user_prompt, temperature,
/// max_output_tokens) serialized as JSON with sorted keys and `\r\n`
/// normalized to `\n`; the request tag is deliberately excluded.
pub fn digest(request: &LlmRequest) -> String {
    let normalize = |s: &str| s.replace("\r\n", "\n");
    // serde_json maps are BTreeMaps, so key order is sorted by construction.
    let canonical = serde_json::json!({
        "max_output_tokens": request.max_output_tokens,
        "model_id": request.model_id,
        "system_prompt": request.system_prompt.as_deref().map(normalize),
        "temperature": request.temperature,
        "user_prompt": normalize(&request.user_prompt),
    });
    let bytes = serde_json::to_vec(&canonical).expect("canonical request serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Provider calls per minute; 0 means unlimited.
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            initial_backoff_ms: 250,
            requests_per_minute: 0,
            max_in_flight: 4,
        }
    }
}

/// One request/response identity captured for the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DigestEntry {
    pub tag: String,
    pub digest: String,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct GatewayStats {
    pub requests: u64,
    pub provider_calls: u64,
    pub cache_hits: u64,
}

/// Complete, replayable record of one pipeline execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub created_unix_ms: u64,
    pub rng_algorithm: String,
    pub seed: u64,
    pub model_ids: Vec<String>,
    pub config: serde_json::Value,
    pub stats: GatewayStats,
    pub request_digests: Vec<DigestEntry>,
}

struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.available.notify_one();
    }
}

/// Shareable gateway handle. Clone freely across workers.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<GatewayInner>,
}

struct GatewayInner {
    provider: Box<dyn Provider>,
    cache: Option<ResponseCache>,
    policy: RetryPolicy,
    in_flight: Semaphore,
    last_call: Mutex<Option<Instant>>,
    single_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    requests: AtomicU64,
    provider_calls: AtomicU64,
    cache_hits: AtomicU64,
    digests: Mutex<Vec<DigestEntry>>,
}

impl Gateway {
    pub fn new(
        provider: Box<dyn Provider>,
        cache: Option<ResponseCache>,
        policy: RetryPolicy,
    ) -> Gateway {
        let in_flight = Semaphore::new(policy.max_in_flight.max(1));
        Gateway {
            inner: Arc::new(GatewayInner {
                provider,
                cache,
                policy,
                in_flight,
                last_call: Mutex::new(None),
                single_flight: Mutex::new(HashMap::new()),
                requests: AtomicU64::new(0),
                provider_calls: AtomicU64::new(0),
                cache_hits: AtomicU64::new(0),
                digests: Mutex::new(Vec::new()),
            }),
        }
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.inner.requests.load(Ordering::SeqCst),
            provider_calls: self.inner.provider_calls.load(Ordering::SeqCst),
            cache_hits: self.inner.cache_hits.load(Ordering::SeqCst),
        }
    }

    /// Digest entries recorded so far, sorted and deduplicated.
    pub fn digest_entries(&self) -> Vec<DigestEntry> {
        let mut entries = self.inner.digests.lock().unwrap().clone();
        entries.sort();
        entries.dedup();
        entries
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let digest = digest(request);
        self.inner.requests.fetch_add(1, Ordering::SeqCst);
        self.inner.digests.lock().unwrap().push(DigestEntry {
            tag: request.request_tag.clone(),
            digest: digest.clone(),
        });

        // Per-digest single-flight: concurrent identical requests wait for
        // the first one to fill the cache instead of dialing the provider.
        let flight = {
            let mut map = self.inner.single_flight.lock().unwrap();
            map.entry(digest.clone())
                .or_insert_with(|| Arc::new(Mutex::new(())))
                .clone()
        };
        let _guard = flight.lock().unwrap();

        if let Some(cache) = &self.inner.cache {
            if let Some(mut cached) = cache.get(&digest).map_err(GatewayError::Cache)? {
                self.inner.cache_hits.fetch_add(1, Ordering::SeqCst);
                cached.from_cache = true;
                return Ok(cached);
            }
        }

        let response = self.call_provider(request, &digest)?;
        if let Some(cache) = &self.inner.cache {
            cache
                .put(&digest, &request.request_tag, &response)
                .map_err(GatewayError::Cache)?;
        }
        Ok(response)
    }

    fn call_provider(
        &self,
        request: &LlmRequest,
        digest: &str,
    ) -> Result<LlmResponse, GatewayError> {
        let policy = &self.inner.policy;
        let mut last_error = String::new();
        for attempt in 0..=policy.max_retries {
            self.rate_limit_wait();
            self.inner.in_flight.acquire();
            let started = Instant::now();
            self.inner.provider_calls.fetch_add(1, Ordering::SeqCst);
            let outcome = self.inner.provider.complete(request, digest);
            self.inner.in_flight.release();
            match outcome {
                Ok(provided) => {
                    return Ok(LlmResponse {
                        text: provided.text,
                        finish_reason: provided.finish_reason,
                        latency_ms: started.elapsed().as_millis() as u64,
                        from_cache: false,
                    });
                }
                Err(ProviderError::Auth(msg)) => return Err(GatewayError::Auth(msg)),
                Err(ProviderError::Fatal(msg)) => return Err(GatewayError::Provider(msg)),
                Err(ProviderError::Retryable(msg)) => {
                    last_error = msg;
                    if attempt < policy.max_retries {
                        let backoff = policy.initial_backoff_ms.saturating_mul(1 << attempt);
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(GatewayError::ProviderExhausted {
            attempts: policy.max_retries + 1,
            last: last_error,
        })
    }

    fn rate_limit_wait(&self) {
        let rpm = self.inner.policy.requests_per_minute;
        if rpm == 0 {
            return;
        }
        let interval = Duration::from_millis(60_000 / rpm as u64);
        let mut last = self.inner.last_call.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < interval {
                std::thread::sleep(interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn request(prompt: &str, tag: &str) -> LlmRequest {
        LlmRequest::new("test-model", prompt, tag)
    }

    #[test]
    fn digest_excludes_request_tag() {
        let a = request("hello", "stage-a");
        let b = request("hello", "stage-b");
        assert_eq!(digest(&a), digest(&b));
    }

    #[test]
    fn digest_tracks_prompt_bytes() {
        let a = request("hello", "t");
        let b = request("hellp", "t");
        assert_ne!(digest(&a), digest(&b));
    }

    #[test]
    fn digest_normalizes_newlines() {
        let a = request("line1\r\nline2", "t");
        let b = request("line1\nline2", "t");
        assert_eq!(digest(&a), digest(&b));
    }

    #[test]
    fn digest_matches_committed_golden() {
        // sha256 of:
        // {"max_output_tokens":4096,"model_id":"test-model","system_prompt":null,
        //  "temperature":0.0,"user_prompt":"hello"}
        // computed once with python's json.dumps(sort_keys=True) + hashlib.
        let fixed = request("hello", "any");
        assert_eq!(
            digest(&fixed),
            "1ead14c8fe61c80669a3de4e7f94fe0e03a99819b34fb4bf9098924e58311290"
        );
    }

    #[test]
    fn cache_hit_returns_identical_text() {
        let tmp = tempfile::tempdir().unwrap();
        let script = MockScript::by_tag([("t", "scripted response")]);
        let gateway = Gateway::new(
            Box::new(MockProvider::new(script)),
            Some(ResponseCache::new(tmp.path())),
            RetryPolicy::default(),
        );
        let req = request("prompt", "t");
        let first = gateway.complete(&req).unwrap();
        let second = gateway.complete(&req).unwrap();
        assert!(!first.from_cache);
        assert!(second.from_cache);
        assert_eq!(first.text, second.text);
        assert_eq!(gateway.stats().provider_calls, 1);
        assert_eq!(gateway.stats().cache_hits, 1);
    }

    #[test]
    fn scripted_mock_serves_by_digest() {
        let req = request("prompt", "untagged");
        let d = digest(&req);
        let script = MockScript::by_digest([(d.as_str(), "digest response")]);
        let gateway = Gateway::new(
            Box::new(MockProvider::new(script)),
            None,
            RetryPolicy::default(),
        );
        assert_eq!(gateway.complete(&req).unwrap().text, "digest response");
    }

    struct AlwaysRateLimited {
        calls: AtomicU32,
    }

    impl Provider for AlwaysRateLimited {
        fn complete(&self, _: &LlmRequest, _: &str) -> Result<ProviderResponse, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Err(ProviderError::Retryable(
                "429 too many requests".to_string(),
            ))
        }

        fn name(&self) -> &'static str {
            "always-429"
        }
    }

    #[test]
    fn retries_exhaust_into_error() {
        let provider = AlwaysRateLimited {
            calls: AtomicU32::new(0),
        };
        let gateway = Gateway::new(
            Box::new(provider),
            None,
            RetryPolicy {
                max_retries: 2,
                initial_backoff_ms: 1,
                ..RetryPolicy::default()
            },
        );
        let err = gateway.complete(&request("p", "t")).unwrap_err();
        match err {
            GatewayError::ProviderExhausted { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn missing_script_entry_is_a_provider_error() {
        let gateway = Gateway::new(
            Box::new(MockProvider::new(MockScript::default())),
            None,
            RetryPolicy::default(),
        );
        let err = gateway.complete(&request("p", "nope")).unwrap_err();
        assert!(matches!(err, GatewayError::Provider(_)));
    }
}

//! Chat completion providers: a deterministic scripted mock plus HTTP
//! backends for OpenAI-compatible and Gemini endpoints.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{FinishReason, LlmRequest};

#[derive(Debug, Clone)]
pub enum ProviderError {
    /// Transient failure (HTTP 429/5xx, transport); the gateway retries.
    Retryable(String),
    Auth(String),
    Fatal(String),
}

#[derive(Debug, Clone)]
pub struct ProviderResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

pub trait Provider: Send + Sync {
    fn complete(
        &self,
        request: &LlmRequest,
        digest: &str,
    ) -> Result<ProviderResponse, ProviderError>;
    fn name(&self) -> &'static str;
}

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

/// Response script for the mock provider: exact digests win over stage tags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_digest: BTreeMap<String, String>,
    #[serde(default)]
    pub by_tag: BTreeMap<String, String>,
}

impl MockScript {
    pub fn by_tag<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> MockScript {
        MockScript {
            by_tag: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            ..MockScript::default()
        }
    }

    pub fn by_digest<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> MockScript {
        MockScript {
            by_digest: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            ..MockScript::default()
        }
    }

    pub fn load(path: &Path) -> Result<MockScript, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Deterministic mock provider with call counting, so tests can assert both
/// response content and how often the provider was actually dialed.
pub struct MockProvider {
    script: MockScript,
    calls: AtomicU64,
    in_flight: AtomicU64,
    peak_in_flight: AtomicU64,
    call_delay: Option<Duration>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> MockProvider {
        MockProvider {
            script,
            calls: AtomicU64::new(0),
            in_flight: AtomicU64::new(0),
            peak_in_flight: AtomicU64::new(0),
            call_delay: None,
        }
    }

    /// Sleep inside each call; used to observe concurrency limits.
    pub fn with_call_delay(mut self, delay: Duration) -> MockProvider {
        self.call_delay = Some(delay);
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> u64 {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn complete(
        &self,
        request: &LlmRequest,
        digest: &str,
    ) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(delay) = self.call_delay {
            std::thread::sleep(delay);
        }
        let text = self
            .script
            .by_digest
            .get(digest)
            .or_else(|| self.script.by_tag.get(&request.request_tag))
            .cloned();
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        match text {
            Some(text) => Ok(ProviderResponse {
                text,
                finish_reason: FinishReason::Complete,
            }),
            None => Err(ProviderError::Fatal(format!(
                "mock script has no response for tag {:?} (digest {})",
                request.request_tag, digest
            ))),
        }
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

// ---------------------------------------------------------------------------
// HTTP providers
// ---------------------------------------------------------------------------

fn classify_status(status: u16, body: &str) -> ProviderError {
    match status {
        401 | 403 => ProviderError::Auth(format!("http {status}: {body}")),
        429 | 500..=599 => ProviderError::Retryable(format!("http {status}: {body}")),
        _ => ProviderError::Fatal(format!("http {status}: {body}")),
    }
}

fn http_client() -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(300))
        .build()
        .map_err(|e| ProviderError::Fatal(e.to_string()))
}

/// `POST {base_url}/chat/completions` with the usual messages payload.
pub struct OpenAiProvider {
    base_url: String,
    api_key: String,
}

impl OpenAiProvider {
    pub fn new(base_url: &str, api_key: &str) -> OpenAiProvider {
        OpenAiProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
        }
    }
}

impl Provider for OpenAiProvider {
    fn complete(
        &self,
        request: &LlmRequest,
        _digest: &str,
    ) -> Result<ProviderResponse, ProviderError> {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_prompt {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": request.user_prompt}));
        let payload = serde_json::json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });

        let response = http_client()?
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&payload)
            .send()
            .map_err(|e| ProviderError::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| ProviderError::Retryable(e.to_string()))?;
        if status != 200 {
            return Err(classify_status(status, &body));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| ProviderError::Fatal(e.to_string()))?;
        let choice = parsed["choices"]
            .get(0)
            .ok_or_else(|| ProviderError::Fatal("response has no choices".to_string()))?;
        let text = choice["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string();
        let finish_reason = match choice["finish_reason"].as_str() {
            Some("length") => FinishReason::Truncated,
            Some("content_filter") => FinishReason::Refused,
            _ if text.is_empty() => FinishReason::Error,
            _ => FinishReason::Complete,
        };
        Ok(ProviderResponse {
            text,
            finish_reason,
        })
    }

    fn name(&self) -> &'static str {
        "openai-compatible"
    }
}

/// `POST {base_url}/v1beta/models/{model}:generateContent`.
pub struct GeminiProvider {
    base_url: String,
    api_key: String,
}

impl GeminiProvider {
    pub fn new(base_url: &str, api_key: &str) -> GeminiProvider {
        GeminiProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
        }
    }
}

impl Provider for GeminiProvider {
    fn complete(
        &self,
        request: &LlmRequest,
        _digest: &str,
    ) -> Result<ProviderResponse, ProviderError> {
        let mut payload = serde_json::json!({
            "contents": [{"role": "user", "parts": [{"text": request.user_prompt}]}],
            "generationConfig": {
                "temperature": request.temperature,
                "maxOutputTokens": request.max_output_tokens,
            },
        });
        if let Some(system) = &request.system_prompt {
            payload["systemInstruction"] = serde_json::json!({"parts": [{"text": system}]});
        }

        let url = format!(
            "{}/v1beta/models/{}:generateContent?key={}",
            self.base_url, request.model_id, self.api_key
        );
        let response = http_client()?
            .post(url)
            .json(&payload)
            .send()
            .map_err(|e| ProviderError::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| ProviderError::Retryable(e.to_string()))?;
        if status != 200 {
            return Err(classify_status(status, &body));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| ProviderError::Fatal(e.to_string()))?;
        let candidate = parsed["candidates"]
            .get(0)
            .ok_or_else(|| ProviderError::Fatal("response has no candidates".to_string()))?;
        let text: String = candidate["content"]["parts"]
            .as_array()
            .map(|parts| {
                parts
                    .iter()
                    .filter_map(|p| p["text"].as_str())
                    .collect::<Vec<_>>()
                    .join("")
            })
            .unwrap_or_default();
        let finish_reason = match candidate["finishReason"].as_str() {
            Some("MAX_TOKENS") => FinishReason::Truncated,
            Some("SAFETY") | Some("PROHIBITED_CONTENT") => FinishReason::Refused,
            _ if text.is_empty() => FinishReason::Error,
            _ => FinishReason::Complete,
        };
        Ok(ProviderResponse {
            text,
            finish_reason,
        })
    }

    fn name(&self) -> &'static str {
        "gemini"
    }
}

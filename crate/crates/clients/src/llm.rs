//! Chat-completion client with bounded retries.

use std::sync::Arc;
use std::time::Duration;

use canvas3d_core::llm::{Llm, LlmError};
use serde::Serialize;

use crate::transport::{HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};
use crate::{ClientConfigError, API_KEY_VAR, LLM_URL_VAR};

pub const LLM_MODEL_VAR: &str = "CANVAS3D_LLM_MODEL";
pub const DEFAULT_LLM_MODEL: &str = "gpt-4o";

/// Exponential backoff, capped. Delays never decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub initial: Duration,
    pub factor: f64,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            initial: Duration::from_millis(500),
            factor: 2.0,
            max: Duration::from_secs(8),
        }
    }
}

impl Backoff {
    pub const NONE: Backoff = Backoff {
        initial: Duration::ZERO,
        factor: 1.0,
        max: Duration::ZERO,
    };

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let secs = self.initial.as_secs_f64() * self.factor.powi(retry.min(64) as i32);
        if !secs.is_finite() || secs >= self.max.as_secs_f64() {
            self.max.max(self.initial)
        } else {
            Duration::from_secs_f64(secs)
        }
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Clone)]
pub struct LlmClient {
    endpoint: String,
    model: String,
    timeout: Duration,
    max_retries: u32,
    api_key: Option<String>,
    temperature: f64,
    backoff: Backoff,
    transport: Arc<dyn Transport>,
    sleeper: Sleeper,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("backoff", &self.backoff)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
}

impl LlmClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration, max_retries: u32) -> Result<Self, ClientConfigError> {
        if timeout.is_zero() {
            return Err(ClientConfigError::InvalidTimeout);
        }
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout,
            max_retries,
            api_key: None,
            temperature: 0.0,
            backoff: Backoff::default(),
            transport: Arc::new(HttpTransport::new()),
            sleeper: Arc::new(std::thread::sleep),
        })
    }

    /// Endpoint from `CANVAS3D_LLM_URL`, key from `CANVAS3D_API_KEY`.
    pub fn from_env() -> Result<Self, ClientConfigError> {
        let url = std::env::var(LLM_URL_VAR).map_err(|_| ClientConfigError::MissingEnv(LLM_URL_VAR))?;
        let model = std::env::var(LLM_MODEL_VAR).unwrap_or_else(|_| DEFAULT_LLM_MODEL.to_string());
        let mut c = Self::new(url, model, Duration::from_secs(120), 3)?;
        c.api_key = std::env::var(API_KEY_VAR).ok();
        Ok(c)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Result<Self, ClientConfigError> {
        if backoff.factor.is_nan() || backoff.factor < 1.0 || backoff.max < backoff.initial {
            return Err(ClientConfigError::InvalidBackoff);
        }
        self.backoff = backoff;
        Ok(self)
    }

    /// Replaces `thread::sleep` between attempts.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    /// Exact bytes sent for one completion.
    pub fn request_body(&self, system: &str, user: &str) -> Vec<u8> {
        let req = ChatRequest {
            model: &self.model,
            messages: [Message { role: "system", content: system }, Message { role: "user", content: user }],
            temperature: self.temperature,
        };
        serde_json::to_vec(&req).expect("plain strings serialize")
    }

    fn request(&self, system: &str, user: &str) -> HttpRequest {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(k) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {k}")));
        }
        HttpRequest {
            url: self.endpoint.clone(),
            headers,
            body: self.request_body(system, user),
            timeout: self.timeout,
        }
    }

    fn attempt(&self, request: &HttpRequest) -> Result<String, LlmError> {
        let resp = self.transport.post(request).map_err(|e| match e {
            TransportError::Timeout => LlmError::Timeout,
            TransportError::Io(m) => LlmError::Transport(m),
        })?;
        completion_text(&resp)
    }
}

fn completion_text(resp: &HttpResponse) -> Result<String, LlmError> {
    let body = String::from_utf8_lossy(&resp.body);
    if !(200..300).contains(&resp.status) {
        return Err(LlmError::ServiceError {
            status: resp.status,
            body: body.chars().take(500).collect(),
        });
    }
    let v: serde_json::Value = serde_json::from_slice(&resp.body).map_err(|e| LlmError::ServiceError {
        status: resp.status,
        body: format!("malformed completion: {e}"),
    })?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::ServiceError {
            status: resp.status,
            body: "completion has no choices[0].message.content".to_string(),
        })
}

impl Llm for LlmClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        if system.trim().is_empty() || user.trim().is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        let request = self.request(system, user);
        let mut last = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                (self.sleeper)(self.backoff.delay(attempt - 1));
            }
            match self.attempt(&request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() => {
                    log::warn!("llm attempt {} of {} failed: {e}", attempt + 1, self.max_retries + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        let last = last.expect("at least one attempt ran");
        if self.max_retries == 0 {
            Err(last)
        } else {
            Err(LlmError::RetriesExhausted {
                attempts: self.max_retries + 1,
                last: last.to_string(),
            })
        }
    }
}

/// An OpenAI-style completion response carrying `text`.
pub fn completion_response(text: &str) -> HttpResponse {
    HttpResponse::json(&serde_json::json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]
    }))
}

//! Optional external scorers: a vision-LLM spatial judge and an HTTP object
//! detector. Neither is needed offline; the oracle detector covers staged scenes.

use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use base64::engine::general_purpose::STANDARD;
use canvas3d_core::eval::{DetectionBox, spatial_score_prompt};
use serde::Deserialize;
use thiserror::Error;

use crate::ClientConfigError;
use crate::transport::{HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("service returned status {status}: {body}")]
    ServiceError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("unreadable reply: {0}")]
    BadReply(String),
}

impl From<TransportError> for JudgeError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Timeout => JudgeError::Timeout,
            TransportError::Io(m) => JudgeError::Transport(m),
        }
    }
}

fn check_status(resp: &HttpResponse) -> Result<(), JudgeError> {
    if (200..300).contains(&resp.status) {
        Ok(())
    } else {
        Err(JudgeError::ServiceError {
            status: resp.status,
            body: String::from_utf8_lossy(&resp.body).chars().take(500).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct JudgeScore {
    pub score: f64,
    #[serde(default)]
    pub explanation: String,
}

/// Pulls the first `{...}` object out of a chat reply.
pub fn parse_judge_reply(text: &str) -> Result<JudgeScore, JudgeError> {
    let start = text.find('{').ok_or_else(|| JudgeError::BadReply(text.to_string()))?;
    let end = text.rfind('}').filter(|&e| e > start).ok_or_else(|| JudgeError::BadReply(text.to_string()))?;
    let s: JudgeScore = serde_json::from_str(&text[start..=end]).map_err(|e| JudgeError::BadReply(e.to_string()))?;
    if !(0.0..=100.0).contains(&s.score) {
        return Err(JudgeError::BadReply(format!("score {} outside [0, 100]", s.score)));
    }
    Ok(s)
}

/// Chat-completion endpoint that accepts image content parts.
#[derive(Clone)]
pub struct SpatialJudge {
    endpoint: String,
    model: String,
    timeout: Duration,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
}

impl SpatialJudge {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Result<Self, ClientConfigError> {
        if timeout.is_zero() {
            return Err(ClientConfigError::InvalidTimeout);
        }
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout,
            api_key: None,
            transport: Arc::new(HttpTransport::new()),
        })
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Scores how well a PNG portrays the spatial layout of `prompt`.
    pub fn score(&self, png: &[u8], prompt: &str) -> Result<JudgeScore, JudgeError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": spatial_score_prompt(prompt)},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{}", STANDARD.encode(png))}}
                ]
            }],
            "temperature": 0.0
        });
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(k) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {k}")));
        }
        let resp = self.transport.post(&HttpRequest {
            url: self.endpoint.clone(),
            headers,
            body: body.to_string().into_bytes(),
            timeout: self.timeout,
        })?;
        check_status(&resp)?;
        let v: serde_json::Value = serde_json::from_slice(&resp.body).map_err(|e| JudgeError::BadReply(e.to_string()))?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| JudgeError::BadReply("no choices[0].message.content".to_string()))?;
        parse_judge_reply(text)
    }
}

/// Detector service: PNG in, JSON list of detection boxes out.
#[derive(Clone)]
pub struct HttpDetector {
    endpoint: String,
    timeout: Duration,
    transport: Arc<dyn Transport>,
}

impl HttpDetector {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ClientConfigError> {
        if timeout.is_zero() {
            return Err(ClientConfigError::InvalidTimeout);
        }
        Ok(Self {
            endpoint: endpoint.into(),
            timeout,
            transport: Arc::new(HttpTransport::new()),
        })
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn detect(&self, png: &[u8]) -> Result<Vec<DetectionBox>, JudgeError> {
        let resp = self.transport.post(&HttpRequest {
            url: self.endpoint.clone(),
            headers: vec![("Content-Type".to_string(), "image/png".to_string())],
            body: png.to_vec(),
            timeout: self.timeout,
        })?;
        check_status(&resp)?;
        serde_json::from_slice(&resp.body).map_err(|e| JudgeError::BadReply(e.to_string()))
    }
}

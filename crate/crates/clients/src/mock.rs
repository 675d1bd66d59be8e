//! In-process stand-ins honoring the same contracts as the HTTP clients.

use std::collections::VecDeque;
use std::sync::Mutex;

use canvas3d_core::llm::{Llm, LlmError};
use image::{Rgb, RgbImage};

use crate::transport::{HttpRequest, HttpResponse, Transport, TransportError};

/// Returns the user prompt unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoLlm;

impl Llm for EchoLlm {
    fn complete(&self, _system: &str, user: &str) -> Result<String, LlmError> {
        Ok(user.to_string())
    }
}

/// Answers from a fixed queue and records every prompt pair.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    replies: Mutex<VecDeque<Result<String, LlmError>>>,
    calls: Mutex<Vec<(String, String)>>,
}

impl ScriptedLlm {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::with_results(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn with_results(replies: impl IntoIterator<Item = Result<String, LlmError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<(String, String)> {
        self.calls.lock().expect("poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("poisoned").len()
    }
}

impl Llm for ScriptedLlm {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        self.calls.lock().expect("poisoned").push((system.to_string(), user.to_string()));
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(LlmError::ServiceError { status: 404, body: "script exhausted".to_string() }))
    }
}

/// Transport replaying scripted outcomes in order; records each request.
#[derive(Debug, Default)]
pub struct MockTransport {
    script: Mutex<VecDeque<Result<HttpResponse, TransportError>>>,
    requests: Mutex<Vec<HttpRequest>>,
}

impl MockTransport {
    pub fn new(script: impl IntoIterator<Item = Result<HttpResponse, TransportError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// `failures` copies of `error`, then `success`.
    pub fn failing_then(failures: usize, error: Result<HttpResponse, TransportError>, success: HttpResponse) -> Self {
        Self::new(std::iter::repeat_n(error, failures).chain([Ok(success)]))
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.requests.lock().expect("poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("poisoned").len()
    }
}

impl Transport for MockTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.requests.lock().expect("poisoned").push(request.clone());
        self.script
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Io("mock script exhausted".to_string())))
    }
}

/// Image backend that answers every request with the same 64×64 PNG.
#[derive(Debug, Default)]
pub struct MockBackend {
    requests: Mutex<Vec<HttpRequest>>,
}

impl MockBackend {
    pub const SIZE: u32 = 64;

    pub fn new() -> Self {
        Self::default()
    }

    /// Diagonal gradient, byte-stable.
    pub fn image_png() -> Vec<u8> {
        let img = RgbImage::from_fn(Self::SIZE, Self::SIZE, |x, y| Rgb([(x * 4) as u8, (y * 4) as u8, ((x + y) * 2) as u8]));
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory png");
        out.into_inner()
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.requests.lock().expect("poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("poisoned").len()
    }
}

impl Transport for MockBackend {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.requests.lock().expect("poisoned").push(request.clone());
        Ok(HttpResponse::ok("image/png", Self::image_png()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_and_script() {
        assert_eq!(EchoLlm.complete("s", "u").unwrap(), "u");
        let s = ScriptedLlm::new(["a", "b"]);
        assert_eq!(s.complete("s1", "u1").unwrap(), "a");
        assert_eq!(s.complete("s2", "u2").unwrap(), "b");
        assert!(s.complete("s3", "u3").is_err());
        assert_eq!(s.calls().len(), 3);
        assert_eq!(s.calls()[1], ("s2".to_string(), "u2".to_string()));
    }

    #[test]
    fn backend_png_is_stable() {
        let a = MockBackend::image_png();
        assert_eq!(a, MockBackend::image_png());
        let img = image::load_from_memory(&a).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
    }
}

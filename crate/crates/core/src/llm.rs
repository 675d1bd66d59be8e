//! Text-completion interface shared by registration and layout synthesis.
//!
//! The HTTP client lives in `canvas3d-clients`; any closure with the same
//! shape works as an in-process stand-in.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("service returned status {status}: {body}")]
    ServiceError { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("empty system or user prompt")]
    EmptyPrompt,
}

impl LlmError {
    /// Timeouts, transport faults, 429 and 5xx are worth another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Timeout | LlmError::Transport(_) => true,
            LlmError::ServiceError { status, .. } => *status == 429 || *status >= 500,
            LlmError::RetriesExhausted { .. } | LlmError::EmptyPrompt => false,
        }
    }
}

pub trait Llm {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError>;
}

impl<F> Llm for F
where
    F: Fn(&str, &str) -> Result<String, LlmError>,
{
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        self(system, user)
    }
}

impl<L: Llm + ?Sized> Llm for std::sync::Arc<L> {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        (**self).complete(system, user)
    }
}

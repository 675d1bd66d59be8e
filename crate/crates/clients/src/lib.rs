//! Clients for the external services: an LLM for registration and layout
//! prompts, and conditional image-generation backends. Every client talks
//! through a [`Transport`], so the mocks here run the same code paths offline.

mod generate;
mod judge;
mod library;
mod llm;
pub mod mock;
mod transport;

use thiserror::Error;

pub use generate::{ConditionKind, GenClient, GenError, GeneratedImage, GenerationRequest, ModelDescriptor, multipart_body};
pub use judge::{HttpDetector, JudgeError, JudgeScore, SpatialJudge, parse_judge_reply};
pub use library::{ImageEntry, ImageLibrary, LibraryError};
pub use llm::{Backoff, DEFAULT_LLM_MODEL, LLM_MODEL_VAR, LlmClient, completion_response};
pub use transport::{HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};

pub const LLM_URL_VAR: &str = "CANVAS3D_LLM_URL";
pub const GEN_URL_VAR: &str = "CANVAS3D_GEN_URL";
pub const API_KEY_VAR: &str = "CANVAS3D_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientConfigError {
    #[error("timeout must be positive")]
    InvalidTimeout,
    #[error("backoff factor must be at least 1 and max at least initial")]
    InvalidBackoff,
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
}

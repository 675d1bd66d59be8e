//! Sessions over the canvas3d engine: prompt to scene, edit log, on-disk
//! persistence, the HTTP API and the command-line front end.

pub mod api;
pub mod commands;
pub mod pipeline;
pub mod session;
pub mod store;

use canvas3d_clients::{GenError, LibraryError};
use canvas3d_core::assets::{MeshError, RegistrationError, RetrievalError};
use canvas3d_core::encode::EncodeError;
use canvas3d_core::scene::{Rejection, SchemaViolation};
use canvas3d_core::synthesis::{LayoutError, RealizeError};
use thiserror::Error;

pub use pipeline::{Assets, SessionReport, create_session, keyword_categories, session_id};
pub use session::{AddObject, HistoryEntry, SceneSession, replay};
pub use store::SessionStore;

/// Failure of a session operation, tagged with the stage that raised it.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("registration: no known category in the prompt")]
    NoCategories,
    #[error("index: {0}")]
    Index(String),
    #[error("registration: {0}")]
    Registration(#[from] RegistrationError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("layout: {0}")]
    Layout(#[from] LayoutError),
    #[error("realize: {0}")]
    Realize(#[from] RealizeError),
    #[error("affordances: {0}")]
    Affordance(String),
    #[error("rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error("mesh: {0}")]
    ParseError(#[from] MeshError),
    #[error("no asset matches `{0}`")]
    NoMatchingAsset(String),
    #[error("randomize magnitude {0} outside [0, 1]")]
    InvalidMagnitude(f64),
    #[error("encode: {0}")]
    Encode(#[from] EncodeError),
    #[error("generate: {0}")]
    Generation(#[from] GenError),
    #[error("library: {0}")]
    Library(#[from] LibraryError),
    #[error("scene document: {0}")]
    Schema(#[from] SchemaViolation),
    #[error("corrupt session store: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

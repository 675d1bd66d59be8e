//! HTTP front end. Every edit goes through the session's own lock, so
//! actions and generations on one session run strictly in arrival order;
//! blocking work runs off the async workers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path as UrlPath, Request, State};
use axum::http::{StatusCode, header};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use canvas3d_clients::mock::MockBackend;
use canvas3d_clients::{ConditionKind, GenClient, GenError, LibraryError, ModelDescriptor};
use canvas3d_core::assets::MeshFormat;
use canvas3d_core::encode::{DepthMode, EncodeOptions};
use canvas3d_core::llm::Llm;
use canvas3d_core::scene::{ObjectAction, Scene, save_scene};
use serde::Deserialize;
use serde_json::{Value, json};
use tokio::sync::Mutex;

use crate::session::{AddObject, SceneSession};
use crate::store::SessionStore;
use crate::{Assets, SessionError, create_session};

/// Largest accepted request body (mesh uploads).
const BODY_LIMIT: usize = 64 * 1024 * 1024;

/// A generation backend and the client that talks to it.
#[derive(Debug, Clone)]
pub struct Backend {
    pub model: ModelDescriptor,
    pub client: GenClient,
}

/// The in-process backends: `mock` takes every condition, `mock-depth` only
/// depth.
pub fn mock_backends() -> Vec<Backend> {
    let transport = Arc::new(MockBackend::new());
    let client = GenClient::new(Duration::from_secs(30)).expect("positive timeout").with_transport(transport);
    vec![
        Backend {
            model: ModelDescriptor {
                id: "mock".into(),
                supported_conditions: ConditionKind::ALL.into(),
                endpoint: "mock://backend".into(),
            },
            client: client.clone(),
        },
        Backend {
            model: ModelDescriptor {
                id: "mock-depth".into(),
                supported_conditions: [ConditionKind::Depth].into(),
                endpoint: "mock://backend".into(),
            },
            client,
        },
    ]
}

type SharedSession = Arc<Mutex<SceneSession>>;

pub struct AppState {
    pub assets: Assets,
    pub store: SessionStore,
    pub llm: Option<Arc<dyn Llm + Send + Sync>>,
    pub backends: Vec<Backend>,
    sessions: Mutex<HashMap<String, SharedSession>>,
}

impl AppState {
    pub fn new(assets: Assets, store: SessionStore, llm: Option<Arc<dyn Llm + Send + Sync>>, backends: Vec<Backend>) -> Self {
        Self {
            assets,
            store,
            llm,
            backends,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// Live session, recovered from disk on first use.
    async fn session(self: &Arc<Self>, id: &str) -> Result<SharedSession, ApiError> {
        let mut sessions = self.sessions.lock().await;
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        if !valid_name(id) || !self.store.exists(id) {
            return Err(ApiError::not_found(format!("no session `{id}`")));
        }
        let state = self.clone();
        let owned = id.to_string();
        let session = blocking(move || state.store.load(&owned, &state.assets.meshes)).await?;
        let shared = Arc::new(Mutex::new(session));
        sessions.insert(id.to_string(), shared.clone());
        Ok(shared)
    }

    fn backend(&self, id: &str) -> Result<&Backend, ApiError> {
        self.backends
            .iter()
            .find(|b| b.model.id == id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no model `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::Rejected(_) => StatusCode::CONFLICT,
            SessionError::EmptyPrompt
            | SessionError::NoCategories
            | SessionError::NoMatchingAsset(_)
            | SessionError::ParseError(_)
            | SessionError::InvalidMagnitude(_)
            | SessionError::Generation(GenError::UnsupportedCondition { .. } | GenError::MissingCondition(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Generation(_) => StatusCode::BAD_GATEWAY,
            SessionError::Library(LibraryError::NoSuchImage(_)) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, SessionError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

/// Ids and file names we are willing to put in a path.
fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.starts_with('.') && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

fn scene_value(scene: &Scene) -> Value {
    serde_json::from_slice(&save_scene(scene)).expect("scene documents are json")
}

fn raw(content_type: &'static str, bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, content_type)], bytes).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/scene", get(get_scene))
        .route("/sessions/{id}/actions", post(act))
        .route("/sessions/{id}/objects", post(add_object))
        .route("/sessions/{id}/randomize", post(randomize))
        .route("/sessions/{id}/encode", post(encode))
        .route("/sessions/{id}/conditions/{name}", get(get_condition))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/images", get(list_images))
        .route("/sessions/{id}/images/{n}", get(get_image))
        .route("/sessions/{id}/images/{n}/like", post(like))
        .route("/sessions/{id}/meshes/{mesh_ref}", get(get_session_mesh))
        .route("/meshes/{asset_id}", get(get_mesh))
        .route("/models", get(models))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

#[derive(Deserialize)]
struct CreateBody {
    prompt: String,
    #[serde(default)]
    seed: u64,
}

async fn create(State(state): State<Arc<AppState>>, Json(body): Json<CreateBody>) -> Result<Response, ApiError> {
    let st = state.clone();
    let mut session = blocking(move || create_session(&body.prompt, &st.assets, st.llm.as_deref().map(|l| l as &dyn Llm), body.seed)).await?;
    let mut sessions = state.sessions.lock().await;
    let base = session.id.clone();
    let mut n = 1;
    while sessions.contains_key(&session.id) || state.store.exists(&session.id) {
        n += 1;
        session.id = format!("{base}-{n}");
    }
    state.store.save(&session)?;
    let out = json!({
        "id": session.id,
        "scene": scene_value(&session.scene),
        "report": session.report.as_ref().map(|r| json!({
            "requests": r.requests.iter().map(|c| json!({"category": c.category, "count": c.count})).collect::<Vec<_>>(),
            "dropped": r.dropped,
            "layout_source": format!("{:?}", r.layout_source).to_lowercase(),
            "layout_rejections": r.layout_rejections,
        })),
    });
    sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_scene(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let s = session.lock().await;
    Ok(raw("application/json", save_scene(&s.scene)))
}

#[derive(Deserialize)]
struct ActionBody {
    #[serde(default)]
    target: String,
    action: ObjectAction,
}

async fn act(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, Json(body): Json<ActionBody>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let mut s = session.lock().await;
    s.apply(&body.target, &body.action)?;
    state.store.append(&s, 1)?;
    Ok(raw("application/json", save_scene(&s.scene)))
}

#[derive(Deserialize)]
struct PromptBody {
    prompt: String,
}

/// JSON `{prompt}` or a multipart upload with a `file` part (`.obj`/`.ply`)
/// and an optional `category` field.
async fn add_object(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, request: Request) -> Result<Response, ApiError> {
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let add = if is_multipart {
        let mut form = <Multipart as FromRequest<()>>::from_request(request, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        let mut category = None;
        let mut file = None;
        while let Some(field) = form.next_field().await.map_err(|e| ApiError::bad_request(e.to_string()))? {
            match field.name() {
                Some("category") => category = Some(field.text().await.map_err(|e| ApiError::bad_request(e.to_string()))?),
                Some("file") => {
                    let name = field.file_name().unwrap_or("mesh.obj").to_string();
                    let ext = Path::new(&name).extension().and_then(|e| e.to_str()).unwrap_or("obj").to_string();
                    let format = MeshFormat::from_extension(&ext).ok_or_else(|| ApiError::bad_request(format!("unsupported mesh type `{ext}`")))?;
                    let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
                    file = Some((format, bytes.to_vec()));
                }
                _ => {}
            }
        }
        let (format, bytes) = file.ok_or_else(|| ApiError::bad_request("missing `file` part"))?;
        AddObject::Mesh { category, format, bytes }
    } else {
        let Json(body) = <Json<PromptBody> as FromRequest<()>>::from_request(request, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        AddObject::Prompt(body.prompt)
    };

    let session = state.session(&id).await?;
    let guard = session.lock_owned().await;
    let st = state.clone();
    let (object_id, scene) = blocking(move || {
        let mut s = guard;
        let object_id = s.add_object(add, &st.assets)?;
        st.store.append(&s, 1)?;
        Ok((object_id, scene_value(&s.scene)))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": object_id, "scene": scene }))).into_response())
}

#[derive(Deserialize)]
struct RandomizeBody {
    magnitude: f64,
    #[serde(default)]
    seed: u64,
}

async fn randomize(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, Json(body): Json<RandomizeBody>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let mut s = session.lock().await;
    let n = s.randomize_objects(body.magnitude, body.seed)?;
    state.store.append(&s, n)?;
    Ok(raw("application/json", save_scene(&s.scene)))
}

#[derive(Deserialize)]
struct EncodeBody {
    #[serde(default)]
    kinds: Vec<String>,
    #[serde(default)]
    inverse_depth: bool,
}

fn parse_kinds(names: &[String]) -> Result<Vec<ConditionKind>, ApiError> {
    if names.is_empty() {
        return Ok(ConditionKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| ConditionKind::parse(n).ok_or_else(|| ApiError::bad_request(format!("unknown condition `{n}`"))))
        .collect()
}

/// Writes the requested condition files under the session and returns
/// their URLs.
async fn encode(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, Json(body): Json<EncodeBody>) -> Result<Response, ApiError> {
    let kinds = parse_kinds(&body.kinds)?;
    let session = state.session(&id).await?;
    let guard = session.lock_owned().await;
    let st = state.clone();
    let files = blocking(move || {
        let options = EncodeOptions {
            depth_mode: if body.inverse_depth { DepthMode::Inverse } else { DepthMode::Linear },
            mesh_format: kinds.contains(&ConditionKind::Mesh).then_some(MeshFormat::Obj),
            pointcloud: None,
        };
        let bundle = guard.encode(&options)?;
        let dir = st.store.conditions_dir(&guard.id);
        std::fs::create_dir_all(&dir)?;
        let mut out = Vec::new();
        for f in bundle.files()? {
            if ConditionKind::of_file(&f.name).is_some_and(|k| kinds.contains(&k)) {
                std::fs::write(dir.join(&f.name), &f.bytes)?;
                out.push(json!({
                    "kind": ConditionKind::of_file(&f.name).map(|k| k.to_string()),
                    "name": f.name,
                    "url": format!("/sessions/{}/conditions/{}", guard.id, f.name),
                }));
            }
        }
        Ok(out)
    })
    .await?;
    Ok(Json(json!({ "files": files })).into_response())
}

fn mime_of(name: &str) -> &'static str {
    match Path::new(name).extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg") => "image/jpeg",
        Some("json") => "application/json",
        _ => "text/plain",
    }
}

async fn get_condition(State(state): State<Arc<AppState>>, UrlPath((id, name)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    state.session(&id).await?;
    if !valid_name(&name) {
        return Err(ApiError::not_found(format!("no condition `{name}`")));
    }
    let bytes = std::fs::read(state.store.conditions_dir(&id).join(&name)).map_err(|_| ApiError::not_found(format!("no condition `{name}`")))?;
    Ok(raw(mime_of(&name), bytes))
}

#[derive(Deserialize)]
struct GenerateBody {
    model: String,
    #[serde(default)]
    conditions: Vec<String>,
    #[serde(default)]
    prompt: String,
    seed: Option<u64>,
}

async fn generate(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, Json(body): Json<GenerateBody>) -> Result<Response, ApiError> {
    let kinds = parse_kinds(&body.conditions)?;
    let backend = state.backend(&body.model)?.clone();
    let session = state.session(&id).await?;
    let guard = session.lock_owned().await;
    let st = state.clone();
    let entry = blocking(move || {
        let mut library = st.store.library(&guard.id)?;
        guard.generate(&body.prompt, &kinds, &backend.model, &backend.client, body.seed, &mut library)
    })
    .await?;
    let url = format!("/sessions/{id}/images/{}", entry.index);
    Ok((StatusCode::CREATED, Json(json!({ "url": url, "image": entry }))).into_response())
}

async fn list_images(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let _order = session.lock().await;
    let library = state.store.library(&id)?;
    let images: Vec<Value> = library
        .entries()
        .iter()
        .map(|e| json!({ "url": format!("/sessions/{id}/images/{}", e.index), "image": e }))
        .collect();
    Ok(Json(json!({ "images": images, "like_ratio": library.like_ratio() })).into_response())
}

async fn get_image(State(state): State<Arc<AppState>>, UrlPath((id, n)): UrlPath<(String, usize)>) -> Result<Response, ApiError> {
    state.session(&id).await?;
    let library = state.store.library(&id)?;
    let path = library.path_of(n).map_err(SessionError::from)?;
    Ok(raw(mime_of(&path.to_string_lossy()), std::fs::read(path).map_err(SessionError::from)?))
}

#[derive(Deserialize)]
struct LikeBody {
    #[serde(default = "yes")]
    liked: bool,
}

fn yes() -> bool {
    true
}

async fn like(State(state): State<Arc<AppState>>, UrlPath((id, n)): UrlPath<(String, usize)>, body: Option<Json<LikeBody>>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let _order = session.lock().await;
    let liked = body.map(|Json(b)| b.liked).unwrap_or(true);
    let mut library = state.store.library(&id)?;
    let entry = library.set_liked(n, liked).map_err(SessionError::from)?.clone();
    Ok(Json(json!({ "image": entry, "like_ratio": library.like_ratio() })).into_response())
}

async fn get_mesh(State(state): State<Arc<AppState>>, UrlPath(asset_id): UrlPath<String>) -> Result<Response, ApiError> {
    let mesh = state.assets.meshes.get(&asset_id).ok_or_else(|| ApiError::not_found(format!("no mesh `{asset_id}`")))?;
    Ok(raw("text/plain", mesh.to_obj().into_bytes()))
}

/// Index meshes and this session's uploads.
async fn get_session_mesh(State(state): State<Arc<AppState>>, UrlPath((id, mesh_ref)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let s = session.lock().await;
    let mesh = s.meshes.get(&mesh_ref).ok_or_else(|| ApiError::not_found(format!("no mesh `{mesh_ref}`")))?;
    Ok(raw("text/plain", mesh.to_obj().into_bytes()))
}

async fn models(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "models": state.backends.iter().map(|b| &b.model).collect::<Vec<_>>() }))
}

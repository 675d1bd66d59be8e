//! `canvas3d synth | encode | eval | serve`.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use canvas3d_clients::{GenClient, LlmClient, ModelDescriptor};
use canvas3d_core::assets::MeshFormat;
use canvas3d_core::encode::{DepthMode, EncodeOptions};
use canvas3d_core::eval::{DetectionBox, evaluate, oracle_detections, parse_relations, shipped_intended, shipped_relations};
use canvas3d_core::llm::Llm;
use canvas3d_core::scene::load_scene;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::api::{AppState, Backend, mock_backends, router};
use crate::session::SceneSession;
use crate::store::{SessionStore, is_session_dir, read_session, write_session};
use crate::{Assets, SessionError, create_session};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

fn input_err(path: &Path, message: impl ToString) -> CommandError {
    CommandError::Input {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "canvas3d", version, about = "Compose a 3D scene from a prompt and turn it into generation conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a scene from a prompt.
    Synth(SynthArgs),
    /// Render condition files from a scene document.
    Encode(EncodeArgs),
    /// Score generated detections against a target.
    Eval(EvalArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArg {
    /// Asset index directory; the bundled demo index when omitted.
    #[arg(long)]
    pub index: Option<PathBuf>,
}

impl IndexArg {
    fn assets(&self) -> Result<Assets, CommandError> {
        Ok(match &self.index {
            Some(dir) => Assets::load_dir(dir)?,
            None => Assets::demo(),
        })
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub prompt: String,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use keyword registration and the fallback layout even if an LLM is configured.
    #[arg(long)]
    pub offline: bool,
    #[command(flatten)]
    pub index: IndexArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeshArg {
    Obj,
    Ply,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub depth: bool,
    #[arg(long)]
    pub skeleton: bool,
    #[arg(long)]
    pub lighting: bool,
    #[arg(long)]
    pub scene_image: bool,
    #[arg(long, value_enum)]
    pub mesh: Option<MeshArg>,
    /// Sample this many surface points into `pointcloud.ply`.
    #[arg(long)]
    pub pointcloud: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub pointcloud_seed: u64,
    /// Quantize 1/depth instead of depth.
    #[arg(long)]
    pub inverse_depth: bool,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub index: IndexArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detections JSON, or a scene document scored with the oracle detector.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub generated: PathBuf,
    /// Relation list; the shipped evaluation relations when omitted.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// JSON list of intended categories; defaults to the categories the relations mention.
    #[arg(long)]
    pub intended: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session directories live here.
    #[arg(long, default_value = "canvas3d-data")]
    pub data: PathBuf,
    #[command(flatten)]
    pub index: IndexArg,
}

/// The configured LLM, if `CANVAS3D_LLM_URL` is set.
pub fn env_llm() -> Option<LlmClient> {
    match LlmClient::from_env() {
        Ok(c) => Some(c),
        Err(e) => {
            log::info!("no LLM configured ({e}); running offline");
            None
        }
    }
}

/// Mock backends plus one at `CANVAS3D_GEN_URL` when set.
pub fn env_backends() -> Vec<Backend> {
    let mut out = mock_backends();
    if let Ok(model) = ModelDescriptor::from_env() {
        match GenClient::new(Duration::from_secs(300)) {
            Ok(client) => out.push(Backend { model, client }),
            Err(e) => log::warn!("generation backend: {e}"),
        }
    }
    out
}

fn emit(line: &str) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(std::io::stdout().lock(), "{line}")
}

pub fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn synth(a: SynthArgs) -> Result<(), CommandError> {
    let assets = a.index.assets()?;
    let llm = if a.offline { None } else { env_llm() };
    let session = create_session(&a.prompt, &assets, llm.as_ref().map(|l| l as &dyn Llm), a.seed)?;
    write_session(&a.output, &session)?;
    if let Some(r) = &session.report {
        for d in &r.dropped {
            log::warn!("dropped unknown category `{d}`");
        }
        for why in &r.layout_rejections {
            log::warn!("layout attempt rejected: {why}");
        }
        log::info!("layout from {:?}", r.layout_source);
    }
    emit(&a.output.join("scene.json").display().to_string())?;
    Ok(())
}

fn encode(a: EncodeArgs) -> Result<(), CommandError> {
    let assets = a.index.assets()?;
    let bytes = std::fs::read(&a.scene).map_err(|e| input_err(&a.scene, e))?;
    let scene = load_scene(&bytes).map_err(|e| input_err(&a.scene, e))?;
    // Uploaded meshes live in the session history next to the scene.
    let dir = a.scene.parent().unwrap_or(Path::new("."));
    let meshes = if is_session_dir(dir) {
        read_session(dir, &assets.meshes)?.meshes
    } else {
        assets.meshes.clone()
    };
    let session = SceneSession::restore("cli", scene, Vec::new(), meshes)?;

    let any = a.depth || a.skeleton || a.lighting || a.scene_image || a.mesh.is_some() || a.pointcloud.is_some();
    let options = EncodeOptions {
        depth_mode: if a.inverse_depth { DepthMode::Inverse } else { DepthMode::Linear },
        mesh_format: match a.mesh {
            Some(MeshArg::Obj) => Some(MeshFormat::Obj),
            Some(MeshArg::Ply) => Some(MeshFormat::Ply),
            None if !any => Some(MeshFormat::Obj),
            None => None,
        },
        pointcloud: a.pointcloud.map(|n| (n, a.pointcloud_seed)),
    };
    let wanted = |name: &str| {
        !any || match name {
            "depth.png" => a.depth,
            "skeleton.json" => a.skeleton,
            "lighting.json" => a.lighting,
            "scene.png" => a.scene_image,
            _ => true,
        }
    };
    let bundle = session.encode(&options)?;
    std::fs::create_dir_all(&a.output)?;
    for f in bundle.files().map_err(SessionError::from)? {
        if wanted(&f.name) {
            let path = a.output.join(&f.name);
            std::fs::write(&path, &f.bytes)?;
            emit(&path.display().to_string())?;
        }
    }
    Ok(())
}

/// A detections list, or a scene whose oracle detections stand in for one.
fn read_detections(path: &Path) -> Result<Vec<DetectionBox>, CommandError> {
    let bytes = std::fs::read(path).map_err(|e| input_err(path, e))?;
    if let Ok(boxes) = serde_json::from_slice::<Vec<DetectionBox>>(&bytes) {
        return Ok(boxes);
    }
    let scene = load_scene(&bytes).map_err(|e| input_err(path, format!("neither detections nor a scene document ({e})")))?;
    Ok(oracle_detections(&scene, &scene.camera))
}

fn eval(a: EvalArgs) -> Result<(), CommandError> {
    let target = read_detections(&a.target)?;
    let generated = read_detections(&a.generated)?;
    let relations = match &a.relations {
        Some(p) => parse_relations(&std::fs::read_to_string(p).map_err(|e| input_err(p, e))?).map_err(|e| input_err(p, e))?,
        None => shipped_relations(),
    };
    let intended: BTreeSet<String> = match (&a.intended, &a.relations) {
        (Some(p), _) => serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| input_err(p, e))?).map_err(|e| input_err(p, e))?,
        (None, None) => shipped_intended(),
        (None, Some(_)) => relations.iter().flat_map(|r| [r.subject.clone(), r.object.clone()]).collect(),
    };
    let report = evaluate(&target, &generated, &relations, &intended).map_err(|e| CommandError::Config(e.to_string()))?;
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CommandError> {
    let assets = a.index.assets()?;
    let store = SessionStore::open(&a.data)?;
    let llm = env_llm().map(|l| Arc::new(l) as Arc<dyn Llm + Send + Sync>);
    let state = Arc::new(AppState::new(assets, store, llm, env_backends()));
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().map_err(|e| CommandError::Config(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{addr}");
        axum::serve(listener, router(state)).await
    })?;
    Ok(())
}


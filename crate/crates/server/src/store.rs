//! One directory per session: `scene.json`, `history.jsonl`, `images/` and
//! `conditions/`. The first history line holds the initial scene; the rest
//! are accepted edits, so a session is recovered by replay.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use canvas3d_clients::ImageLibrary;
use canvas3d_core::assets::MeshStore;
use canvas3d_core::scene::{load_scene, save_scene};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::SessionError;
use crate::session::{HistoryEntry, SceneSession};

const SCENE_FILE: &str = "scene.json";
const HISTORY_FILE: &str = "history.jsonl";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename = "initial")]
struct InitialLine {
    id: String,
    scene: Value,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn images_dir(&self, id: &str) -> PathBuf {
        self.dir(id).join("images")
    }

    pub fn conditions_dir(&self, id: &str) -> PathBuf {
        self.dir(id).join("conditions")
    }

    pub fn library(&self, id: &str) -> Result<ImageLibrary, SessionError> {
        Ok(ImageLibrary::open(self.images_dir(id))?)
    }

    pub fn exists(&self, id: &str) -> bool {
        is_session_dir(&self.dir(id))
    }

    /// Session ids with a history file, sorted.
    pub fn ids(&self) -> Result<Vec<String>, SessionError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if is_session_dir(&entry.path()) {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    /// Writes the whole session, replacing anything stored under its id.
    pub fn save(&self, session: &SceneSession) -> Result<(), SessionError> {
        write_session(&self.dir(&session.id), session)
    }

    /// Appends the last `n` history entries and refreshes `scene.json`.
    pub fn append(&self, session: &SceneSession, n: usize) -> Result<(), SessionError> {
        let dir = self.dir(&session.id);
        let mut file = OpenOptions::new().append(true).open(dir.join(HISTORY_FILE))?;
        let start = session.history.len().saturating_sub(n);
        for entry in &session.history[start..] {
            writeln!(file, "{}", serde_json::to_string(entry).expect("history serializes"))?;
        }
        file.sync_data()?;
        fs::write(dir.join(SCENE_FILE), save_scene(&session.scene))?;
        Ok(())
    }

    /// Rebuilds a session by replaying its history; `scene.json` is rewritten
    /// from the result.
    pub fn load(&self, id: &str, base_meshes: &MeshStore) -> Result<SceneSession, SessionError> {
        let dir = self.dir(id);
        let session = read_session(&dir, base_meshes)?;
        fs::write(dir.join(SCENE_FILE), save_scene(&session.scene))?;
        Ok(session)
    }
}

/// Writes `scene.json` and `history.jsonl` into `dir`.
pub fn write_session(dir: &Path, session: &SceneSession) -> Result<(), SessionError> {
    fs::create_dir_all(dir.join("images"))?;
    let initial = InitialLine {
        id: session.id.clone(),
        scene: serde_json::from_slice(&save_scene(&session.initial)).map_err(|e| SessionError::Corrupt(e.to_string()))?,
    };
    let mut text = serde_json::to_string(&initial).expect("initial line serializes");
    text.push('\n');
    for entry in &session.history {
        text.push_str(&serde_json::to_string(entry).expect("history serializes"));
        text.push('\n');
    }
    fs::write(dir.join(HISTORY_FILE), text)?;
    fs::write(dir.join(SCENE_FILE), save_scene(&session.scene))?;
    Ok(())
}

/// Replays the `history.jsonl` in `dir`. Leaves the directory untouched.
pub fn read_session(dir: &Path, base_meshes: &MeshStore) -> Result<SceneSession, SessionError> {
    let name = dir.display();
    let text = fs::read_to_string(dir.join(HISTORY_FILE))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| SessionError::Corrupt(format!("{name}: empty history")))?;
    let initial: InitialLine = serde_json::from_str(first).map_err(|e| SessionError::Corrupt(format!("{name} line 1: {e}")))?;
    let scene = load_scene(initial.scene.to_string().as_bytes())?;
    let history = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str::<HistoryEntry>(l).map_err(|e| SessionError::Corrupt(format!("{name} line {}: {e}", i + 2))))
        .collect::<Result<Vec<_>, _>>()?;
    SceneSession::restore(initial.id, scene, history, base_meshes.clone())
}

/// Whether `dir` holds a session history.
pub fn is_session_dir(dir: &Path) -> bool {
    dir.join(HISTORY_FILE).is_file()
}

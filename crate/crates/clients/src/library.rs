//! Generated-image library: numbered files plus a `library.json` index.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::{ConditionKind, GeneratedImage, GenerationRequest};

const INDEX_FILE: &str = "library.json";

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt library index: {0}")]
    Corrupt(String),
    #[error("no image #{0}")]
    NoSuchImage(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub index: usize,
    /// Relative to the library directory.
    pub file: String,
    pub prompt: String,
    pub model: String,
    pub conditions: Vec<ConditionKind>,
    pub seed: Option<u64>,
    pub width: u32,
    pub height: u32,
    pub latency_ms: u64,
    pub liked: bool,
}

#[derive(Debug)]
pub struct ImageLibrary {
    dir: PathBuf,
    entries: Vec<ImageEntry>,
}

impl ImageLibrary {
    /// Opens or creates the library at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LibraryError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let path = dir.join(INDEX_FILE);
        let entries = if path.exists() {
            serde_json::from_slice(&fs::read(&path)?).map_err(|e| LibraryError::Corrupt(e.to_string()))?
        } else {
            Vec::new()
        };
        Ok(Self { dir, entries })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[ImageEntry] {
        &self.entries
    }

    pub fn get(&self, n: usize) -> Result<&ImageEntry, LibraryError> {
        self.entries.get(n).ok_or(LibraryError::NoSuchImage(n))
    }

    pub fn path_of(&self, n: usize) -> Result<PathBuf, LibraryError> {
        Ok(self.dir.join(&self.get(n)?.file))
    }

    pub fn add(&mut self, image: &GeneratedImage, request: &GenerationRequest) -> Result<&ImageEntry, LibraryError> {
        let index = self.entries.len();
        let file = format!("{index:04}.{}", image.extension);
        fs::write(self.dir.join(&file), &image.bytes)?;
        self.entries.push(ImageEntry {
            index,
            file,
            prompt: request.prompt.clone(),
            model: request.model.id.clone(),
            conditions: request.kinds(),
            seed: request.seed,
            width: image.width,
            height: image.height,
            latency_ms: image.latency.as_millis() as u64,
            liked: false,
        });
        self.flush()?;
        Ok(&self.entries[index])
    }

    pub fn set_liked(&mut self, n: usize, liked: bool) -> Result<&ImageEntry, LibraryError> {
        self.entries.get_mut(n).ok_or(LibraryError::NoSuchImage(n))?.liked = liked;
        self.flush()?;
        Ok(&self.entries[n])
    }

    /// Liked images over all images; `None` when empty.
    pub fn like_ratio(&self) -> Option<f64> {
        (!self.entries.is_empty()).then(|| self.entries.iter().filter(|e| e.liked).count() as f64 / self.entries.len() as f64)
    }

    fn flush(&self) -> Result<(), LibraryError> {
        let mut text = serde_json::to_string_pretty(&self.entries).expect("entries serialize");
        text.push('\n');
        fs::write(self.dir.join(INDEX_FILE), text)?;
        Ok(())
    }
}

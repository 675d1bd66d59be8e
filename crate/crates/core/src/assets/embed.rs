use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-length embedding")]
    ZeroVector,
}

/// Cosine of the angle between two embeddings.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("no embedding recorded for text {0:?}")]
    UnknownText(String),
    #[error("text has no embeddable tokens: {0:?}")]
    EmptyText(String),
}

/// Maps query text (the running scene description) into the index's
/// embedding space.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
}

/// Precomputed query embeddings keyed by exact text, typically exported by
/// the same sentence encoder that produced the index.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim, table: HashMap::new() }
    }

    pub fn insert(&mut self, text: impl Into<String>, embedding: Vec<f32>) {
        assert_eq!(embedding.len(), self.dim, "embedding dimension");
        self.table.insert(text.into(), embedding);
    }

    /// Reads JSON lines of `{"text": ..., "embedding": [...]}`.
    pub fn from_jsonl(dim: usize, text: &str) -> Result<Self, String> {
        #[derive(serde::Deserialize)]
        struct Line {
            text: String,
            embedding: Vec<f32>,
        }
        let mut out = Self::new(dim);
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let l: Line = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
            if l.embedding.len() != dim {
                return Err(format!("line {}: dimension {} != {dim}", n + 1, l.embedding.len()));
            }
            out.table.insert(l.text, l.embedding);
        }
        Ok(out)
    }
}

impl Embedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        self.table.get(text).cloned().ok_or_else(|| EmbedError::UnknownText(text.to_string()))
    }
}

/// Signed feature hashing of the set of lowercase words, L2-normalized.
///
/// A deterministic stand-in for a sentence encoder: texts sharing words
/// score higher. Used for the bundled demo index and offline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }
}

/// FNV-1a followed by the splitmix64 finalizer.
fn word_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = vec![0.0f64; self.dim];
        let words: std::collections::BTreeSet<String> =
            text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect();
        for word in words {
            let h = word_hash(word.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[slot] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::EmptyText(text.to_string()));
        }
        Ok(v.into_iter().map(|x| (x / norm) as f32).collect())
    }
}

//! Asset index: annotated, embedded 3D models grouped by category, the
//! prerequisite graph between categories, model retrieval and mesh I/O.

mod demo;
mod embed;
mod mesh;
mod registration;
mod shapes;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use demo::demo_index;
pub use embed::{EmbedError, Embedder, HashingEmbedder, SimilarityError, TableEmbedder, cosine_similarity};
pub use mesh::{Mesh, MeshError, MeshFormat, load_mesh};
pub use registration::{
    CategoryInference, RegistrationError, RetrievalError, concat_description, infer_categories, parse_category_counts, registration_prompt,
    retrieve_models,
};
pub use shapes::{MeshStore, procedural_mesh};

use crate::scene::TagSet;

/// Footprint and height of an asset in meters. `front` is the length of the
/// front face (local x), `side` the depth (local z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Dims {
    pub front: f64,
    pub side: f64,
    pub height: f64,
}

impl Dims {
    pub fn new(front: f64, side: f64, height: f64) -> Self {
        Self { front, side, height }
    }
}

impl From<[f64; 3]> for Dims {
    fn from([front, side, height]: [f64; 3]) -> Self {
        Self { front, side, height }
    }
}

impl From<Dims> for [f64; 3] {
    fn from(d: Dims) -> Self {
        [d.front, d.side, d.height]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetRecord {
    pub id: String,
    pub category: String,
    pub annotation: String,
    pub embedding: Vec<f32>,
    pub dims: Dims,
    pub tags: TagSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryRequest {
    pub category: String,
    pub count: u32,
}

impl CategoryRequest {
    pub fn new(category: impl Into<String>, count: u32) -> Self {
        Self {
            category: category.into(),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("index header: {0}")]
    Header(String),
    #[error("index line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("asset `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("duplicate asset id `{0}`")]
    DuplicateId(String),
    #[error("category `{0}` has no assets")]
    EmptyCategory(String),
    #[error("relation graph has a cycle through `{0}`")]
    CyclicRelations(String),
    #[error("relation mentions unknown category `{0}`")]
    UnknownRelationCategory(String),
    #[error("{0}")]
    Io(String),
}

/// Prerequisite → dependent edges between categories, e.g. table → laptop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationGraph {
    edges: Vec<(String, String)>,
}

impl RelationGraph {
    pub fn new(edges: Vec<(String, String)>) -> Result<Self, IndexError> {
        let graph = Self { edges };
        graph.check_acyclic()?;
        Ok(graph)
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    /// Direct prerequisites of `category`, in edge order.
    pub fn prerequisites<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |(_, d)| d == category).map(|(p, _)| p.as_str())
    }

    fn check_acyclic(&self) -> Result<(), IndexError> {
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(g: &'a RelationGraph, n: &'a str, state: &mut BTreeMap<&'a str, u8>) -> Result<(), IndexError> {
            match state.get(n) {
                Some(1) => return Err(IndexError::CyclicRelations(n.to_string())),
                Some(2) => return Ok(()),
                _ => {}
            }
            state.insert(n, 1);
            for p in g.prerequisites(n) {
                visit(g, p, state)?;
            }
            state.insert(n, 2);
            Ok(())
        }
        for (_, d) in &self.edges {
            visit(self, d, &mut state)?;
        }
        Ok(())
    }

    /// Adds every missing prerequisite (count 1 unless requested) right before
    /// the first category that needs it. Closing a closed list is a no-op.
    pub fn close(&self, requests: &[CategoryRequest]) -> Vec<CategoryRequest> {
        let wanted: BTreeMap<&str, u32> = requests.iter().rev().map(|r| (r.category.as_str(), r.count)).collect();
        let mut out: Vec<CategoryRequest> = Vec::new();
        let mut seen = HashSet::new();
        fn push<'a>(
            g: &'a RelationGraph,
            c: &'a str,
            wanted: &BTreeMap<&str, u32>,
            seen: &mut HashSet<String>,
            out: &mut Vec<CategoryRequest>,
        ) {
            if seen.contains(c) {
                return;
            }
            seen.insert(c.to_string());
            for p in g.prerequisites(c) {
                push(g, p, wanted, seen, out);
            }
            out.push(CategoryRequest::new(c, wanted.get(c).copied().unwrap_or(1).max(1)));
        }
        for r in requests {
            push(self, &r.category, &wanted, &mut seen, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetIndex {
    records: Vec<AssetRecord>,
    embedding_dim: usize,
    categories: Vec<String>,
    setting: String,
    relation_graph: RelationGraph,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    embedding_dim: usize,
    #[serde(default = "default_setting")]
    setting: String,
    categories: Vec<String>,
    #[serde(default)]
    relations: Vec<(String, String)>,
}

fn default_setting() -> String {
    "indoor".to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    category: String,
    annotation: String,
    dims: Dims,
    #[serde(default)]
    tags: TagSet,
    /// Position of the first component, in floats, within the blob.
    offset: usize,
}

const UNIT_TOL: f64 = 1e-6;

impl AssetIndex {
    pub fn new(
        embedding_dim: usize,
        setting: impl Into<String>,
        categories: Vec<String>,
        records: Vec<AssetRecord>,
        relation_graph: RelationGraph,
    ) -> Result<Self, IndexError> {
        if embedding_dim == 0 {
            return Err(IndexError::Header("embedding_dim must be >= 1".into()));
        }
        let cats: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        for r in &records {
            let invalid = |message: String| IndexError::Invalid { id: r.id.clone(), message };
            if !ids.insert(r.id.as_str()) {
                return Err(IndexError::DuplicateId(r.id.clone()));
            }
            if !cats.contains(r.category.as_str()) {
                return Err(invalid(format!("category `{}` is not listed", r.category)));
            }
            if r.embedding.len() != embedding_dim {
                return Err(invalid(format!("embedding has {} components, expected {embedding_dim}", r.embedding.len())));
            }
            let norm = r.embedding.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("embedding norm {norm} is not 1")));
            }
            let d = r.dims;
            if !(d.front > 0.0 && d.side > 0.0 && d.height > 0.0) {
                return Err(invalid("dims must be positive".into()));
            }
        }
        for c in &categories {
            if !records.iter().any(|r| &r.category == c) {
                return Err(IndexError::EmptyCategory(c.clone()));
            }
        }
        for (p, d) in relation_graph.edges() {
            for c in [p, d] {
                if !cats.contains(c.as_str()) {
                    return Err(IndexError::UnknownRelationCategory(c.clone()));
                }
            }
        }
        Ok(Self {
            records,
            embedding_dim,
            categories,
            setting: setting.into(),
            relation_graph,
        })
    }

    /// Parses `index.jsonl` (header line, then one record per line) and the
    /// little-endian float32 embedding blob.
    pub fn from_parts(index_jsonl: &str, embeddings: &[u8]) -> Result<Self, IndexError> {
        let mut lines = index_jsonl.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| IndexError::Header("missing header line".into()))?;
        let header: HeaderLine = serde_json::from_str(header).map_err(|e| IndexError::Header(e.to_string()))?;
        if !embeddings.len().is_multiple_of(4) {
            return Err(IndexError::Header("embedding blob length is not a multiple of 4".into()));
        }
        let floats: Vec<f32> = embeddings.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let dim = header.embedding_dim;
        let mut records = Vec::new();
        for (n, line) in lines {
            let rec: RecordLine = serde_json::from_str(line).map_err(|e| IndexError::Record {
                line: n + 1,
                message: e.to_string(),
            })?;
            let end = rec.offset.checked_add(dim).filter(|&e| e <= floats.len()).ok_or_else(|| IndexError::Record {
                line: n + 1,
                message: format!("offset {} + {dim} exceeds blob of {} floats", rec.offset, floats.len()),
            })?;
            records.push(AssetRecord {
                id: rec.id,
                category: rec.category,
                annotation: rec.annotation,
                embedding: floats[rec.offset..end].to_vec(),
                dims: rec.dims,
                tags: rec.tags,
            });
        }
        let graph = RelationGraph::new(header.relations)?;
        Self::new(dim, header.setting, header.categories, records, graph)
    }

    /// Reads `index.jsonl` and `embeddings.f32` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, IndexError> {
        let io = |p: &Path, e: std::io::Error| IndexError::Io(format!("{}: {e}", p.display()));
        let ip = dir.join("index.jsonl");
        let ep = dir.join("embeddings.f32");
        let index = std::fs::read_to_string(&ip).map_err(|e| io(&ip, e))?;
        let blob = std::fs::read(&ep).map_err(|e| io(&ep, e))?;
        Self::from_parts(&index, &blob)
    }

    /// Inverse of [`AssetIndex::from_parts`].
    pub fn to_parts(&self) -> (String, Vec<u8>) {
        let header = HeaderLine {
            embedding_dim: self.embedding_dim,
            setting: self.setting.clone(),
            categories: self.categories.clone(),
            relations: self.relation_graph.edges().to_vec(),
        };
        let mut text = serde_json::to_string(&header).expect("header serializes");
        text.push('\n');
        let mut blob = Vec::with_capacity(self.records.len() * self.embedding_dim * 4);
        for (i, r) in self.records.iter().enumerate() {
            let line = RecordLine {
                id: r.id.clone(),
                category: r.category.clone(),
                annotation: r.annotation.clone(),
                dims: r.dims,
                tags: r.tags.clone(),
                offset: i * self.embedding_dim,
            };
            text.push_str(&serde_json::to_string(&line).expect("record serializes"));
            text.push('\n');
            for x in &r.embedding {
                blob.extend_from_slice(&x.to_le_bytes());
            }
        }
        (text, blob)
    }

    pub fn save_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let (text, blob) = self.to_parts();
        std::fs::write(dir.join("index.jsonl"), text)?;
        std::fs::write(dir.join("embeddings.f32"), blob)
    }

    pub fn records(&self) -> &[AssetRecord] {
        &self.records
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// "indoor" or "outdoor"; fills the registration prompt.
    pub fn setting(&self) -> &str {
        &self.setting
    }

    pub fn relation_graph(&self) -> &RelationGraph {
        &self.relation_graph
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.categories.iter().any(|c| c == category)
    }

    pub fn record(&self, id: &str) -> Option<&AssetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn records_in<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a AssetRecord> + 'a {
        self.records.iter().filter(move |r| r.category == category)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> Result<RelationGraph, IndexError> {
        RelationGraph::new(edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    fn req(list: &[(&str, u32)]) -> Vec<CategoryRequest> {
        list.iter().map(|(c, n)| CategoryRequest::new(*c, *n)).collect()
    }

    #[test]
    fn closure_pulls_prerequisites_first() {
        let g = graph(&[("table", "laptop"), ("table", "mug"), ("bed", "pillow")]).unwrap();
        assert_eq!(g.close(&req(&[("laptop", 1)])), req(&[("table", 1), ("laptop", 1)]));
        let closed = g.close(&req(&[("mug", 2), ("pillow", 1), ("table", 3)]));
        assert_eq!(closed, req(&[("table", 3), ("mug", 2), ("bed", 1), ("pillow", 1)]));
        assert_eq!(g.close(&closed), closed);
    }

    #[test]
    fn cycles_are_rejected() {
        assert!(matches!(graph(&[("a", "b"), ("b", "c"), ("c", "a")]), Err(IndexError::CyclicRelations(_))));
        assert!(graph(&[("a", "b"), ("a", "c"), ("b", "c")]).is_ok());
    }

    #[test]
    fn parts_round_trip() {
        let index = demo_index();
        let (text, blob) = index.to_parts();
        let back = AssetIndex::from_parts(&text, &blob).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn validation_errors() {
        let index = demo_index();
        let (text, blob) = index.to_parts();
        assert!(matches!(AssetIndex::from_parts(&text, &blob[..blob.len() - 4]), Err(IndexError::Record { .. })));
        let mut bad = blob.clone();
        bad[0..4].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(AssetIndex::from_parts(&text, &bad), Err(IndexError::Invalid { .. })));
        let first_record = text.lines().nth(1).unwrap().to_string();
        let doubled = format!("{text}{first_record}\n");
        assert!(matches!(AssetIndex::from_parts(&doubled, &blob), Err(IndexError::DuplicateId(_))));
        assert!(matches!(AssetIndex::from_parts("", &blob), Err(IndexError::Header(_))));
    }
}

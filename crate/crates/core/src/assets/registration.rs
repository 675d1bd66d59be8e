//! Category/quantity inference and iterative model retrieval.

use std::cmp::Ordering;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{AssetIndex, AssetRecord, CategoryRequest, EmbedError, Embedder, SimilarityError, cosine_similarity};
use crate::llm::{Llm, LlmError};

const REGISTRATION_SYSTEM: &str = include_str!("../../resources/prompts/registration_system.txt");
const REGISTRATION_USER: &str = include_str!("../../resources/prompts/registration_user.txt");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistrationError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("could not find any `name: count` pair in the response")]
    UnparseableResponse(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("category `{0}` is not in the index")]
    MissingCategory(String),
    #[error("category `{0}` has no assets")]
    EmptyIndexForCategory(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// Registration system/user messages for `prompt`.
pub fn registration_prompt(prompt: &str, index: &AssetIndex) -> (String, String) {
    let system = REGISTRATION_SYSTEM
        .replacen("You have 20 ", &format!("You have {} ", index.categories().len()), 1)
        .replace("[indoor/outdoor]", index.setting())
        .replace("[categories list]", &index.categories().join(", "));
    let user = REGISTRATION_USER.replace("[user_text_prompt]", prompt);
    (system, user)
}

fn pair_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Za-z][A-Za-z0-9 _\-]*?)\s*:\s*(\d+)").expect("valid regex"))
}

fn normalize_name(raw: &str) -> String {
    raw.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Extracts `name: count` pairs in order of appearance. Names are lowercased
/// with `_` read as a space.
pub fn parse_category_counts(response: &str) -> Result<Vec<(String, u32)>, RegistrationError> {
    let pairs: Vec<(String, u32)> = pair_regex()
        .captures_iter(response)
        .filter_map(|c| Some((normalize_name(&c[1]), c[2].parse().ok()?)))
        .collect();
    if pairs.is_empty() {
        return Err(RegistrationError::UnparseableResponse(response.to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryInference {
    /// Closed under the relation graph; prerequisites precede dependents.
    pub requests: Vec<CategoryRequest>,
    /// Names the model returned that the index does not know.
    pub dropped: Vec<String>,
    pub raw_response: String,
}

/// Asks the LLM for categories and counts, keeps those in the index and
/// closes the list under the prerequisite graph.
pub fn infer_categories(prompt: &str, index: &AssetIndex, llm: &dyn Llm) -> Result<CategoryInference, RegistrationError> {
    if prompt.trim().is_empty() {
        return Err(RegistrationError::EmptyPrompt);
    }
    let (system, user) = registration_prompt(prompt, index);
    let raw = llm.complete(&system, &user)?;
    let pairs = parse_category_counts(&raw)?;
    let mut requests: Vec<CategoryRequest> = Vec::new();
    let mut dropped = Vec::new();
    for (name, count) in pairs {
        if !index.has_category(&name) {
            log::warn!("dropping unknown category `{name}` from registration response");
            dropped.push(name);
        } else if count == 0 || requests.iter().any(|r| r.category == name) {
            continue;
        } else {
            requests.push(CategoryRequest::new(name, count));
        }
    }
    Ok(CategoryInference {
        requests: index.relation_graph().close(&requests),
        dropped,
        raw_response: raw,
    })
}

/// Running-description update: single-space concatenation.
pub fn concat_description(current: &str, annotation: &str) -> String {
    format!("{current} {annotation}")
}

/// Iterative retrieval. For each category in order, candidates are ranked by
/// cosine similarity between their annotation embedding and the running
/// description (highest first, ties by smaller id); the top `count` are
/// taken and the top pick's annotation is appended to the description.
/// When a category has fewer assets than requested, picks repeat in rank
/// order.
pub fn retrieve_models(prompt: &str, requests: &[CategoryRequest], index: &AssetIndex, embedder: &dyn Embedder) -> Result<Vec<AssetRecord>, RetrievalError> {
    for r in requests {
        if !index.has_category(&r.category) {
            return Err(RetrievalError::MissingCategory(r.category.clone()));
        }
    }
    let mut description = prompt.to_string();
    let mut out = Vec::new();
    for r in requests {
        let query = embedder.embed(&description)?;
        let mut scored = index
            .records_in(&r.category)
            .map(|m| Ok((cosine_similarity(&m.embedding, &query)?, m)))
            .collect::<Result<Vec<_>, SimilarityError>>()?;
        if scored.is_empty() {
            return Err(RetrievalError::EmptyIndexForCategory(r.category.clone()));
        }
        scored.sort_by(|(sa, a), (sb, b)| sb.partial_cmp(sa).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id)));
        for k in 0..r.count as usize {
            out.push(scored[k % scored.len()].1.clone());
        }
        description = concat_description(&description, &scored[0].1.annotation);
    }
    Ok(out)
}

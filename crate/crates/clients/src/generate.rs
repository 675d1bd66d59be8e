//! Conditional image generation over multipart/form-data.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine;
use base64::engine::general_purpose::STANDARD;
use canvas3d_core::encode::{ConditionBundle, ConditionFile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transport::{HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};
use crate::{API_KEY_VAR, ClientConfigError, GEN_URL_VAR};

/// Condition modalities a backend may accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    SceneImage,
    Depth,
    Skeleton,
    Lighting,
    Mesh,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 5] = [
        ConditionKind::SceneImage,
        ConditionKind::Depth,
        ConditionKind::Skeleton,
        ConditionKind::Lighting,
        ConditionKind::Mesh,
    ];

    /// Multipart field name.
    pub fn field_name(self) -> &'static str {
        match self {
            ConditionKind::SceneImage => "scene_image",
            ConditionKind::Depth => "depth",
            ConditionKind::Skeleton => "skeleton",
            ConditionKind::Lighting => "lighting",
            ConditionKind::Mesh => "mesh",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.field_name() == name)
    }

    /// Kind of a bundle file, by its canonical name.
    pub fn of_file(name: &str) -> Option<Self> {
        match name {
            "scene.png" => Some(ConditionKind::SceneImage),
            "depth.png" => Some(ConditionKind::Depth),
            "skeleton.json" => Some(ConditionKind::Skeleton),
            "lighting.json" => Some(ConditionKind::Lighting),
            "mesh.obj" | "mesh.ply" => Some(ConditionKind::Mesh),
            _ => None,
        }
    }
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.field_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub id: String,
    pub supported_conditions: BTreeSet<ConditionKind>,
    pub endpoint: String,
}

impl ModelDescriptor {
    /// A backend at `CANVAS3D_GEN_URL` that accepts every condition.
    pub fn from_env() -> Result<Self, ClientConfigError> {
        let endpoint = std::env::var(GEN_URL_VAR).map_err(|_| ClientConfigError::MissingEnv(GEN_URL_VAR))?;
        Ok(Self {
            id: "default".to_string(),
            supported_conditions: ConditionKind::ALL.into(),
            endpoint,
        })
    }

    pub fn supports(&self, kind: ConditionKind) -> bool {
        self.supported_conditions.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("model `{model}` does not accept the {condition} condition")]
    UnsupportedCondition { model: String, condition: ConditionKind },
    #[error("bundle has no {0} condition")]
    MissingCondition(ConditionKind),
    #[error("backend returned status {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("response is not an image: {0}")]
    InvalidImagePayload(String),
    #[error("encode: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// At most one file per kind, in kind order.
    pub conditions: Vec<(ConditionKind, ConditionFile)>,
    pub model: ModelDescriptor,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    /// Picks `kinds` out of an encoded bundle.
    pub fn from_bundle(
        prompt: impl Into<String>,
        bundle: &ConditionBundle,
        kinds: &[ConditionKind],
        model: ModelDescriptor,
        seed: Option<u64>,
    ) -> Result<Self, GenError> {
        let files = bundle.files().map_err(|e| GenError::Encode(e.to_string()))?;
        Self::from_files(prompt, files, kinds, model, seed)
    }

    pub fn from_files(
        prompt: impl Into<String>,
        files: Vec<ConditionFile>,
        kinds: &[ConditionKind],
        model: ModelDescriptor,
        seed: Option<u64>,
    ) -> Result<Self, GenError> {
        let wanted: BTreeSet<ConditionKind> = kinds.iter().copied().collect();
        let mut conditions = Vec::new();
        for kind in &wanted {
            let file = files
                .iter()
                .find(|f| ConditionKind::of_file(&f.name) == Some(*kind))
                .ok_or(GenError::MissingCondition(*kind))?;
            conditions.push((*kind, file.clone()));
        }
        Ok(Self {
            prompt: prompt.into(),
            conditions,
            model,
            seed,
        })
    }

    pub fn kinds(&self) -> Vec<ConditionKind> {
        self.conditions.iter().map(|(k, _)| *k).collect()
    }

    /// Every attached condition must be supported by the model.
    pub fn validate(&self) -> Result<(), GenError> {
        for (kind, _) in &self.conditions {
            if !self.model.supports(*kind) {
                return Err(GenError::UnsupportedCondition {
                    model: self.model.id.clone(),
                    condition: *kind,
                });
            }
        }
        Ok(())
    }
}

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, b| (h ^ *b as u64).wrapping_mul(0x100_0000_01b3))
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Content type and body. The boundary is derived from the content, so equal
/// requests serialize to equal bytes.
pub fn multipart_body(request: &GenerationRequest) -> (String, Vec<u8>) {
    let mut texts: Vec<(&str, String)> = vec![("prompt", request.prompt.clone()), ("model", request.model.id.clone())];
    if let Some(seed) = request.seed {
        texts.push(("seed", seed.to_string()));
    }
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for (k, v) in &texts {
        h = fnv1a(fnv1a(h, k.as_bytes()), v.as_bytes());
    }
    for (_, f) in &request.conditions {
        h = fnv1a(fnv1a(h, f.name.as_bytes()), &f.bytes);
    }
    let mut boundary = format!("canvas3d-{h:016x}");
    let clashes = |b: &str| texts.iter().any(|(_, v)| v.contains(b)) || request.conditions.iter().any(|(_, f)| contains(&f.bytes, b.as_bytes()));
    while clashes(&boundary) {
        h = fnv1a(h, b"+");
        boundary = format!("canvas3d-{h:016x}");
    }

    let mut body = Vec::new();
    for (name, value) in &texts {
        body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
        body.extend_from_slice(value.as_bytes());
        body.extend_from_slice(b"\r\n");
    }
    for (kind, f) in &request.conditions {
        body.extend_from_slice(
            format!(
                "--{boundary}\r\nContent-Disposition: form-data; name=\"{}\"; filename=\"{}\"\r\nContent-Type: {}\r\n\r\n",
                kind.field_name(),
                f.name,
                f.mime
            )
            .as_bytes(),
        );
        body.extend_from_slice(&f.bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    /// `png` or `jpg`.
    pub extension: &'static str,
    pub width: u32,
    pub height: u32,
    pub latency: Duration,
}

#[derive(Clone)]
pub struct GenClient {
    timeout: Duration,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
}

impl std::fmt::Debug for GenClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenClient").field("timeout", &self.timeout).finish_non_exhaustive()
    }
}

impl GenClient {
    pub fn new(timeout: Duration) -> Result<Self, ClientConfigError> {
        if timeout.is_zero() {
            return Err(ClientConfigError::InvalidTimeout);
        }
        Ok(Self {
            timeout,
            api_key: std::env::var(API_KEY_VAR).ok(),
            transport: Arc::new(HttpTransport::new()),
        })
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// The HTTP request that `generate_image` would send.
    pub fn http_request(&self, request: &GenerationRequest) -> HttpRequest {
        let (content_type, body) = multipart_body(request);
        let mut headers = vec![("Content-Type".to_string(), content_type)];
        if let Some(k) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {k}")));
        }
        HttpRequest {
            url: request.model.endpoint.clone(),
            headers,
            body,
            timeout: self.timeout,
        }
    }

    /// Validates, uploads and decodes. Nothing is sent when validation fails.
    pub fn generate_image(&self, request: &GenerationRequest) -> Result<GeneratedImage, GenError> {
        request.validate()?;
        let http = self.http_request(request);
        let start = Instant::now();
        let resp = self.transport.post(&http).map_err(|e| match e {
            TransportError::Timeout => GenError::Timeout,
            TransportError::Io(m) => GenError::Transport(m),
        })?;
        let latency = start.elapsed();
        let bytes = image_payload(&resp)?;
        let format = image::guess_format(&bytes).map_err(|e| GenError::InvalidImagePayload(e.to_string()))?;
        let extension = match format {
            image::ImageFormat::Png => "png",
            image::ImageFormat::Jpeg => "jpg",
            other => return Err(GenError::InvalidImagePayload(format!("unsupported format {other:?}"))),
        };
        let img = image::load_from_memory_with_format(&bytes, format).map_err(|e| GenError::InvalidImagePayload(e.to_string()))?;
        Ok(GeneratedImage {
            width: img.width(),
            height: img.height(),
            bytes,
            extension,
            latency,
        })
    }
}

/// Raw image bytes, or JSON `{"image": "<base64>"}`.
fn image_payload(resp: &HttpResponse) -> Result<Vec<u8>, GenError> {
    if !(200..300).contains(&resp.status) {
        return Err(GenError::HttpError {
            status: resp.status,
            body: String::from_utf8_lossy(&resp.body).chars().take(500).collect(),
        });
    }
    let is_json = resp.content_type.as_deref().is_some_and(|c| c.starts_with("application/json"));
    if !is_json {
        return Ok(resp.body.clone());
    }
    let v: serde_json::Value = serde_json::from_slice(&resp.body).map_err(|e| GenError::InvalidImagePayload(e.to_string()))?;
    let b64 = v
        .get("image")
        .and_then(|s| s.as_str())
        .ok_or_else(|| GenError::InvalidImagePayload("JSON response has no `image` field".to_string()))?;
    STANDARD.decode(b64).map_err(|e| GenError::InvalidImagePayload(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kinds: &[ConditionKind]) -> ModelDescriptor {
        ModelDescriptor {
            id: "m".into(),
            supported_conditions: kinds.iter().copied().collect(),
            endpoint: "http://gen".into(),
        }
    }

    fn file(name: &str, bytes: &[u8]) -> ConditionFile {
        ConditionFile {
            name: name.into(),
            mime: "application/octet-stream",
            bytes: bytes.to_vec(),
        }
    }

    #[test]
    fn picks_requested_files_in_kind_order() {
        let files = vec![file("depth.png", b"d"), file("skeleton.json", b"s"), file("scene.png", b"i")];
        let r = GenerationRequest::from_files(
            "p",
            files.clone(),
            &[ConditionKind::Skeleton, ConditionKind::SceneImage, ConditionKind::Skeleton],
            model(&[]),
            None,
        )
        .unwrap();
        assert_eq!(r.kinds(), vec![ConditionKind::SceneImage, ConditionKind::Skeleton]);
        let e = GenerationRequest::from_files("p", files, &[ConditionKind::Mesh], model(&[]), None).unwrap_err();
        assert_eq!(e, GenError::MissingCondition(ConditionKind::Mesh));
    }

    #[test]
    fn multipart_layout() {
        let r = GenerationRequest::from_files("a cat", vec![file("depth.png", b"\x00\x01")], &[ConditionKind::Depth], model(&[ConditionKind::Depth]), Some(7)).unwrap();
        let (ct, body) = multipart_body(&r);
        let boundary = ct.strip_prefix("multipart/form-data; boundary=").unwrap();
        let text = String::from_utf8_lossy(&body);
        assert!(text.starts_with(&format!("--{boundary}\r\nContent-Disposition: form-data; name=\"prompt\"\r\n\r\na cat\r\n")));
        assert!(text.contains("name=\"seed\"\r\n\r\n7\r\n"));
        assert!(text.contains("name=\"depth\"; filename=\"depth.png\""));
        assert!(text.ends_with(&format!("--{boundary}--\r\n")));
        assert_eq!(multipart_body(&r), (ct, body));
    }

    #[test]
    fn boundary_occurs_only_as_delimiter() {
        let base = GenerationRequest::from_files("x", vec![], &[], model(&[]), None).unwrap();
        let (ct, _) = multipart_body(&base);
        let b = ct.rsplit('=').next().unwrap().to_string();
        let r = GenerationRequest {
            conditions: vec![(ConditionKind::Depth, file("depth.png", format!("--{b}").as_bytes()))],
            ..base
        };
        let (ct, body) = multipart_body(&r);
        let b = ct.rsplit('=').next().unwrap();
        assert_eq!(String::from_utf8_lossy(&body).matches(b).count(), 4);
    }

    #[test]
    fn payload_decoding() {
        assert_eq!(image_payload(&HttpResponse::ok("image/png", b"raw".to_vec())).unwrap(), b"raw");
        let j = HttpResponse::json(&serde_json::json!({"image": STANDARD.encode(b"xyz")}));
        assert_eq!(image_payload(&j).unwrap(), b"xyz");
        assert!(matches!(image_payload(&HttpResponse::status(500, "no")), Err(GenError::HttpError { status: 500, .. })));
        assert!(matches!(image_payload(&HttpResponse::json(&serde_json::json!({}))), Err(GenError::InvalidImagePayload(_))));
    }
}

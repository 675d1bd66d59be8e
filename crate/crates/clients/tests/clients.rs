use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use canvas3d_clients::mock::{EchoLlm, MockBackend, MockTransport};
use canvas3d_clients::{
    Backoff, ConditionKind, GenClient, GenError, GenerationRequest, HttpResponse, ImageLibrary, LlmClient, ModelDescriptor, TransportError,
    completion_response, multipart_body,
};
use canvas3d_core::assets::CategoryRequest;
use canvas3d_core::encode::ConditionFile;
use canvas3d_core::llm::{Llm, LlmError};
use canvas3d_core::synthesis::build_layout_prompt;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares with the stored snapshot; `CANVAS3D_BLESS=1` rewrites it.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = golden(name);
    if std::env::var_os("CANVAS3D_BLESS").is_some() {
        std::fs::write(&path, bytes).unwrap();
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == bytes, "{name} differs from its golden file");
}

fn client(transport: Arc<MockTransport>, retries: u32) -> (LlmClient, Arc<Mutex<Vec<Duration>>>) {
    let slept = Arc::new(Mutex::new(Vec::new()));
    let log = slept.clone();
    let c = LlmClient::new("http://llm.test/v1/chat/completions", "test-model", Duration::from_secs(30), retries)
        .unwrap()
        .with_transport(transport)
        .with_sleeper(move |d| log.lock().unwrap().push(d));
    (c, slept)
}

#[test]
fn echo_mock() {
    assert_eq!(EchoLlm.complete("sys", "hello").unwrap(), "hello");
}

#[test]
fn fails_twice_then_succeeds() {
    let t = Arc::new(MockTransport::failing_then(2, Err(TransportError::Timeout), completion_response("ok")));
    let (c, slept) = client(t.clone(), 3);
    assert_eq!(c.complete("s", "u").unwrap(), "ok");
    assert_eq!(t.request_count(), 3);
    let d = slept.lock().unwrap().clone();
    assert_eq!(d, vec![Duration::from_millis(500), Duration::from_millis(1000)]);
}

#[test]
fn retries_are_bounded() {
    for retries in 0..5u32 {
        let t = Arc::new(MockTransport::new(std::iter::repeat_n(Ok(HttpResponse::status(503, "busy")), 10)));
        let (c, slept) = client(t.clone(), retries);
        let e = c.complete("s", "u").unwrap_err();
        assert_eq!(t.request_count(), retries as usize + 1);
        if retries == 0 {
            assert_eq!(e, LlmError::ServiceError { status: 503, body: "busy".into() });
        } else {
            assert!(matches!(e, LlmError::RetriesExhausted { attempts, .. } if attempts == retries + 1));
        }
        let d = slept.lock().unwrap().clone();
        assert_eq!(d.len(), retries as usize);
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn permanent_errors_are_not_retried() {
    let t = Arc::new(MockTransport::new([Ok(HttpResponse::status(401, "bad key")), Ok(completion_response("never"))]));
    let (c, _) = client(t.clone(), 3);
    assert!(matches!(c.complete("s", "u"), Err(LlmError::ServiceError { status: 401, .. })));
    assert_eq!(t.request_count(), 1);
    assert_eq!(c.complete(" ", "u"), Err(LlmError::EmptyPrompt));
    assert_eq!(t.request_count(), 1);
}

#[test]
fn backoff_is_configurable() {
    let t = Arc::new(MockTransport::failing_then(3, Err(TransportError::Io("reset".into())), completion_response("ok")));
    let (c, slept) = client(t, 5);
    let c = c
        .with_backoff(Backoff {
            initial: Duration::from_millis(10),
            factor: 3.0,
            max: Duration::from_millis(50),
        })
        .unwrap();
    c.complete("s", "u").unwrap();
    let want: Vec<Duration> = [10, 30, 50].map(Duration::from_millis).to_vec();
    assert_eq!(*slept.lock().unwrap(), want);
}

#[test]
fn layout_request_body_golden() {
    let items = [CategoryRequest::new("table", 1), CategoryRequest::new("laptop", 1), CategoryRequest::new("chair", 2)];
    let sizes: BTreeMap<String, (f64, f64)> = [("table", (1.4, 0.8)), ("laptop", (0.34, 0.24)), ("chair", (0.45, 0.5))]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let (system, user) = build_layout_prompt("a small study with a laptop on a table", &items, &sizes).unwrap();
    let t = Arc::new(MockTransport::new([Ok(completion_response("Location:\n"))]));
    let (c, _) = client(t.clone(), 0);
    c.complete(&system, &user).unwrap();
    let sent = &t.requests()[0];
    assert_eq!(sent.header("content-type"), Some("application/json"));
    assert_eq!(sent.body, c.request_body(&system, &user));
    let v: serde_json::Value = serde_json::from_slice(&sent.body).unwrap();
    assert_eq!(v["messages"][0]["content"], system.as_str());
    assert!(system.contains("Scene design in 300×300 coordinate system"));
    check_golden("llm_request.json", &sent.body);
}

fn model(kinds: &[ConditionKind]) -> ModelDescriptor {
    ModelDescriptor {
        id: "mock-gen".into(),
        supported_conditions: kinds.iter().copied().collect(),
        endpoint: "http://gen.test/generate".into(),
    }
}

fn fixed_files() -> Vec<ConditionFile> {
    vec![
        ConditionFile {
            name: "depth.png".into(),
            mime: "image/png",
            bytes: vec![0x89, b'P', b'N', b'G', 0, 1, 2, 3],
        },
        ConditionFile {
            name: "skeleton.json".into(),
            mime: "application/json",
            bytes: b"{\"people\":[]}\n".to_vec(),
        },
        ConditionFile {
            name: "lighting.json".into(),
            mime: "application/json",
            bytes: b"{\"lights\":[]}\n".to_vec(),
        },
    ]
}

#[test]
fn unsupported_condition_never_reaches_the_network() {
    let backend = Arc::new(MockBackend::new());
    let c = GenClient::new(Duration::from_secs(5)).unwrap().with_transport(backend.clone());
    let r = GenerationRequest::from_files("p", fixed_files(), &[ConditionKind::Skeleton], model(&[ConditionKind::Depth]), None).unwrap();
    assert_eq!(
        c.generate_image(&r),
        Err(GenError::UnsupportedCondition {
            model: "mock-gen".into(),
            condition: ConditionKind::Skeleton
        })
    );
    assert_eq!(backend.request_count(), 0);
}

#[test]
fn mock_backend_image_is_stored_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(MockBackend::new());
    let c = GenClient::new(Duration::from_secs(5)).unwrap().with_transport(backend.clone());
    let r = GenerationRequest::from_files(
        "a chair next to a table",
        fixed_files(),
        &[ConditionKind::Depth, ConditionKind::Lighting],
        model(&[ConditionKind::Depth, ConditionKind::Lighting]),
        Some(42),
    )
    .unwrap();
    let img = c.generate_image(&r).unwrap();
    assert_eq!((img.width, img.height, img.extension), (64, 64, "png"));
    assert_eq!(backend.requests()[0].body, multipart_body(&r).1);

    let mut lib = ImageLibrary::open(dir.path().join("images")).unwrap();
    let entry = lib.add(&img, &r).unwrap().clone();
    assert_eq!(entry.prompt, "a chair next to a table");
    assert_eq!(entry.conditions, vec![ConditionKind::Depth, ConditionKind::Lighting]);
    assert_eq!(entry.seed, Some(42));
    assert_eq!(std::fs::read(lib.path_of(0).unwrap()).unwrap(), MockBackend::image_png());
    lib.set_liked(0, true).unwrap();
    drop(lib);
    let lib = ImageLibrary::open(dir.path().join("images")).unwrap();
    assert_eq!(lib.entries().len(), 1);
    assert!(lib.entries()[0].liked);
    assert_eq!(lib.like_ratio(), Some(1.0));
}

#[test]
fn backend_failures_are_typed() {
    let t = Arc::new(MockTransport::new([Ok(HttpResponse::status(502, "bad gateway")), Ok(HttpResponse::ok("image/png", b"nope".to_vec()))]));
    let c = GenClient::new(Duration::from_secs(5)).unwrap().with_transport(t);
    let r = GenerationRequest::from_files("p", fixed_files(), &[ConditionKind::Depth], model(&[ConditionKind::Depth]), None).unwrap();
    assert!(matches!(c.generate_image(&r), Err(GenError::HttpError { status: 502, .. })));
    assert!(matches!(c.generate_image(&r), Err(GenError::InvalidImagePayload(_))));
}

#[test]
fn multipart_golden() {
    let kinds = [ConditionKind::Depth, ConditionKind::Skeleton, ConditionKind::Lighting];
    let r = GenerationRequest::from_files("a person waving beside a lamp", fixed_files(), &kinds, model(&kinds), Some(7)).unwrap();
    let (content_type, body) = multipart_body(&r);
    assert_eq!(multipart_body(&r.clone()), (content_type.clone(), body.clone()));
    let mut snapshot = format!("Content-Type: {content_type}\r\n\r\n").into_bytes();
    snapshot.extend_from_slice(&body);
    check_golden("multipart_request.bin", &snapshot);
}

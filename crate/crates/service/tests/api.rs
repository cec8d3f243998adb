//! Exercises the HTTP API in-process through `tower::ServiceExt::oneshot`.

use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sphinv_core::io::decode_native_cloud;
use sphinv_core::{chamfer_discrepancy, PointCloud};
use sphinv_model::encoder::{Encoder, EncoderConfig};
use sphinv_model::inversion::{InversionConfig, Models, TrainedPair};
use sphinv_model::spgan::{Generator, GeneratorConfig};
use sphinv_service::routes::CloudJson;
use sphinv_service::{router, AppState, ModelSnapshot};
use tower::ServiceExt;

const N: usize = 32;

fn models() -> Models {
    let gen = Arc::new(
        Generator::new(GeneratorConfig { num_points: N, latent_dim: 4, hidden: 12, style_dim: 6, k: 4 }, 5).unwrap(),
    );
    let ecfg =
        EncoderConfig { k: 4, edge_widths: [8, 8, 8, 8], fused_width: 16, head_width: 12, latent_dim: 4, style_dim: 6 };
    Models {
        pretrained: Some(gen.clone()),
        global: Some(TrainedPair { encoder: Arc::new(Encoder::new(ecfg, false, 6)), generator: gen.clone() }),
        local: Some(TrainedPair { encoder: Arc::new(Encoder::new(ecfg, true, 7)), generator: gen }),
    }
}

fn app_with(workers: usize, max_sessions: usize) -> Router {
    let defaults = InversionConfig { step3_iterations: 40, ..Default::default() };
    let snapshot = ModelSnapshot::new(models(), defaults).unwrap();
    router(Arc::new(AppState::new(snapshot, max_sessions, workers)))
}

fn app() -> Router {
    app_with(2, 16)
}

fn xyz(n: usize, phase: f64) -> String {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.9 + phase;
            format!("{:.6} {:.6} {:.6}\n", t.cos() * 1.5, t.sin(), (i as f64 / n as f64) - 0.5)
        })
        .collect()
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>) -> (StatusCode, Bytes) {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

fn json_of(bytes: &Bytes) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

async fn create(app: &Router, body: &str) -> String {
    let (status, bytes) = call(app, Method::POST, "/sessions", body.to_string()).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&bytes));
    json_of(&bytes)["session_id"].as_str().unwrap().to_string()
}

async fn invert(app: &Router, id: &str, req: Value) -> (StatusCode, Value) {
    let (status, bytes) = call(app, Method::POST, &format!("/sessions/{id}/invert"), req.to_string()).await;
    (status, json_of(&bytes))
}

/// Polls until the job leaves pending/running; returns every distinct state seen.
async fn wait(app: &Router, id: &str) -> (Vec<String>, Value) {
    let mut seen: Vec<String> = Vec::new();
    loop {
        let (status, bytes) = call(app, Method::GET, &format!("/sessions/{id}/status"), Body::empty()).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&bytes);
        let state = v["state"].as_str().unwrap().to_string();
        if seen.last() != Some(&state) {
            seen.push(state.clone());
        }
        if state == "done" || state == "failed" {
            return (seen, v);
        }
        tokio::time::sleep(Duration::from_millis(1)).await;
    }
}

async fn cloud(app: &Router, id: &str, which: &str, format: &str) -> (StatusCode, Bytes) {
    call(app, Method::GET, &format!("/sessions/{id}/cloud?which={which}&format={format}"), Body::empty()).await
}

async fn cloud_json(app: &Router, id: &str, which: &str) -> CloudJson {
    let (status, bytes) = cloud(app, id, which, "json").await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn inverted_session(app: &Router, mode: &str) -> String {
    let id = create(app, &xyz(N, 0.0)).await;
    let (status, _) = invert(app, &id, json!({ "mode": mode, "seed": 3 })).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (_, last) = wait(app, &id).await;
    assert_eq!(last["state"], "done", "{last}");
    id
}

fn to_cloud(c: &CloudJson) -> PointCloud {
    PointCloud::from_rows(&c.positions).unwrap()
}

#[tokio::test]
async fn valid_xyz_creates_a_session() {
    let app = app();
    let (status, bytes) = call(&app, Method::POST, "/sessions", xyz(N, 0.0)).await;
    assert_eq!(status, StatusCode::CREATED);
    let v = json_of(&bytes);
    assert_eq!(v["num_points"], N);
    assert!(!v["session_id"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn cardinality_mismatch_is_422() {
    let (status, bytes) = call(&app(), Method::POST, "/sessions", xyz(7, 0.0)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(json_of(&bytes)["error"].as_str().unwrap().contains('7'));
}

#[tokio::test]
async fn garbage_is_400() {
    let (status, _) = call(&app(), Method::POST, "/sessions", vec![0xffu8, 0x00, 0x13, 0x37, b'z']).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app(), Method::POST, "/sessions", "1 2\n3 4 five\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = app();
    for (m, uri) in [
        (Method::GET, "/sessions/nope/status"),
        (Method::GET, "/sessions/nope/cloud?which=target"),
        (Method::POST, "/sessions/nope/invert"),
        (Method::DELETE, "/sessions/nope/edits/last"),
        (Method::DELETE, "/sessions/nope"),
    ] {
        let (status, _) = call(&app, m, uri, Body::empty()).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn session_limit_is_enforced() {
    let app = app_with(1, 2);
    let a = create(&app, &xyz(N, 0.0)).await;
    create(&app, &xyz(N, 1.0)).await;
    let (status, _) = call(&app, Method::POST, "/sessions", xyz(N, 2.0)).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{a}"), Body::empty()).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    create(&app, &xyz(N, 2.0)).await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn status_moves_pending_running_done() {
    // One worker: the second job must wait while the first runs.
    let app = app_with(1, 4);
    let a = create(&app, &xyz(N, 0.0)).await;
    let b = create(&app, &xyz(N, 0.5)).await;
    let (_, idle) = call(&app, Method::GET, &format!("/sessions/{b}/status"), Body::empty()).await;
    assert_eq!(json_of(&idle)["state"], "idle");

    let long = json!({ "mode": "opt_local", "step3_iterations": 3000 });
    assert_eq!(invert(&app, &a, long.clone()).await.0, StatusCode::ACCEPTED);
    let (status, body) = invert(&app, &b, long).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(body["state"], "pending");

    let (seen_b, last) = wait(&app, &b).await;
    assert_eq!(seen_b, ["pending", "running", "done"], "{last}");
    assert_eq!(last["iterations"], 3000);
    let (seen_a, _) = wait(&app, &a).await;
    assert_eq!(seen_a.last().map(String::as_str), Some("done"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_concurrent_invert_is_409() {
    let app = app_with(1, 4);
    let id = create(&app, &xyz(N, 0.0)).await;
    assert_eq!(invert(&app, &id, json!({ "step3_iterations": 2000 })).await.0, StatusCode::ACCEPTED);
    assert_eq!(invert(&app, &id, json!({})).await.0, StatusCode::CONFLICT);
    wait(&app, &id).await;
    // Once finished a new inversion is accepted again.
    assert_eq!(invert(&app, &id, json!({ "step3_iterations": 5 })).await.0, StatusCode::ACCEPTED);
    wait(&app, &id).await;
}

#[tokio::test]
async fn invalid_invert_requests_are_400() {
    let app = app();
    let id = create(&app, &xyz(N, 0.0)).await;
    assert_eq!(invert(&app, &id, json!({ "mode": "magic" })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(invert(&app, &id, json!({ "iterations": 3 })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(invert(&app, &id, json!({ "step3_iterations": 1_000_000 })).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn final_cd_matches_fetched_clouds() {
    let app = app();
    for mode in ["full", "opt_global", "learn_local"] {
        let id = inverted_session(&app, mode).await;
        let (_, status) = call(&app, Method::GET, &format!("/sessions/{id}/status"), Body::empty()).await;
        let reported = json_of(&status)["final_cd"].as_f64().unwrap();
        let recon = to_cloud(&cloud_json(&app, &id, "recon").await);
        let target = to_cloud(&cloud_json(&app, &id, "target").await);
        let recomputed = chamfer_discrepancy(&recon, &target);
        assert!((reported - recomputed).abs() <= 1e-6, "{mode}: {reported} vs {recomputed}");
    }
}

#[tokio::test]
async fn cloud_payload_contracts() {
    let app = app();
    let id = inverted_session(&app, "full").await;
    let recon = cloud_json(&app, &id, "recon").await;
    assert_eq!(recon.positions.len(), N);
    assert_eq!(recon.colors.as_ref().unwrap().len(), N);
    assert_eq!(recon.correspondence.as_ref().unwrap(), &(0..N).collect::<Vec<_>>());

    let (_, raw) = cloud(&app, &id, "target", "json").await;
    let v = json_of(&raw);
    assert!(v.get("colors").is_none());
    assert_eq!(v["positions"].as_array().unwrap().len(), N);

    assert_eq!(cloud(&app, &id, "other", "json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(cloud(&app, &id, "recon", "obj").await.0, StatusCode::BAD_REQUEST);

    let (status, ply) = cloud(&app, &id, "recon", "ply").await;
    assert_eq!(status, StatusCode::OK);
    let (parsed, colors) = sphinv_core::io::parse_ply(&ply).unwrap();
    assert_eq!(parsed, to_cloud(&recon));
    assert_eq!(colors.unwrap().nrows(), N);
}

#[tokio::test]
async fn clouds_before_inversion() {
    let app = app();
    let id = create(&app, &xyz(N, 0.0)).await;
    assert_eq!(cloud(&app, &id, "target", "json").await.0, StatusCode::OK);
    assert_eq!(cloud(&app, &id, "recon", "json").await.0, StatusCode::NOT_FOUND);
    assert_eq!(cloud(&app, &id, "edited", "json").await.0, StatusCode::NOT_FOUND);
}

async fn push(app: &Router, id: &str, op: Value) -> (StatusCode, Value) {
    let (status, bytes) = call(app, Method::POST, &format!("/sessions/{id}/edits"), op.to_string()).await;
    (status, json_of(&bytes))
}

async fn pop(app: &Router, id: &str) -> (StatusCode, Value) {
    let (status, bytes) = call(app, Method::DELETE, &format!("/sessions/{id}/edits/last"), Body::empty()).await;
    (status, json_of(&bytes))
}

#[tokio::test]
async fn edits_need_a_finished_inversion() {
    let app = app();
    let id = create(&app, &xyz(N, 0.0)).await;
    let (status, _) = push(&app, &id, json!({ "mask": [0, 1], "mode": "additive_noise", "sigma": 0.1 })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(pop(&app, &id).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn zero_sigma_edit_returns_the_reconstruction() {
    let app = app();
    let id = inverted_session(&app, "full").await;
    let recon = cloud_json(&app, &id, "recon").await;
    let (status, v) = push(
        &app,
        &id,
        json!({ "mask": (0..N).collect::<Vec<_>>(), "mode": "additive_noise", "sigma": 0.0, "seed": 9 }),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["edits"], 1);
    let edited: CloudJson = serde_json::from_value(v["cloud"].clone()).unwrap();
    assert_eq!(edited.positions, recon.positions);
    assert_eq!(edited.correspondence, recon.correspondence);
}

#[tokio::test]
async fn push_then_pop_restores_exactly() {
    let app = app();
    let id = inverted_session(&app, "full").await;
    let (_, before) = cloud(&app, &id, "edited", "native").await;
    let (status, v) =
        push(&app, &id, json!({ "mask": [1, 2, 3, 4], "mode": "additive_noise", "sigma": 0.5, "seed": 2 })).await;
    assert_eq!(status, StatusCode::OK);
    let moved: CloudJson = serde_json::from_value(v["cloud"].clone()).unwrap();
    assert_ne!(moved.positions, cloud_json(&app, &id, "recon").await.positions);
    let (status, v) = pop(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["edits"], 0);
    let (_, after) = cloud(&app, &id, "edited", "native").await;
    assert_eq!(before, after);
    assert_eq!(pop(&app, &id).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn out_of_range_mask_names_the_index() {
    let app = app();
    let id = inverted_session(&app, "full").await;
    let (status, v) = push(&app, &id, json!({ "mask": [3, 40], "mode": "additive_noise", "sigma": 0.1 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("40"), "{v}");
    let (status, _) = push(&app, &id, json!({ "mask": [1], "mode": "teleport" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) =
        push(&app, &id, json!({ "mask": [1], "mode": "interpolate_toward", "donor": [], "t": 0.5 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = inverted_session(&app, "full").await;
    let b = inverted_session(&app, "full").await;
    let (_, b_before) = cloud(&app, &b, "edited", "native").await;
    push(&app, &a, json!({ "mask": [0, 5], "mode": "affine_transform", "linear": [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "translation": [0.1, 0.0, 0.0] })).await;
    let (_, b_after) = cloud(&app, &b, "edited", "native").await;
    assert_eq!(b_before, b_after);
    assert_eq!(json_of(&call(&app, Method::GET, &format!("/sessions/{b}"), Body::empty()).await.1)["edits"], json!([]));
}

/// Replays one recorded history against a fresh server.
async fn replay_history() -> (Bytes, Bytes, Bytes) {
    let app = app();
    let id = create(&app, &xyz(N, 0.3)).await;
    invert(&app, &id, json!({ "mode": "full", "seed": 11, "step3_iterations": 25 })).await;
    wait(&app, &id).await;
    for op in [
        json!({ "mask": [0, 1, 2, 3, 4, 5], "mode": "additive_noise", "sigma": 0.2, "seed": 4 }),
        json!({ "mask": [7, 8], "mode": "affine_transform", "linear": [[1.0, 0.0, 0.0], [0.0, 1.5, 0.0], [0.0, 0.0, 1.0]], "translation": [0.0, 0.0, 0.2] }),
        json!({ "mask": [9], "mode": "additive_noise", "sigma": 1.0, "seed": 5 }),
    ] {
        assert_eq!(push(&app, &id, op).await.0, StatusCode::OK);
    }
    pop(&app, &id).await;
    let recon = cloud(&app, &id, "recon", "native").await.1;
    let edited = cloud(&app, &id, "edited", "native").await.1;
    let target = cloud(&app, &id, "target", "native").await.1;
    (target, recon, edited)
}

#[tokio::test]
async fn replayed_history_is_byte_identical() {
    let first = replay_history().await;
    let second = replay_history().await;
    assert_eq!(first, second);
    let edited = decode_native_cloud(&first.2).unwrap();
    assert_eq!(edited.cloud.len(), N);
    assert_eq!(edited.latent_dim, 4);
    assert_ne!(first.1, first.2, "the remaining edits move points");
}

#[tokio::test]
async fn health_and_api_description() {
    let app = app();
    let (status, bytes) = call(&app, Method::GET, "/health", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&bytes);
    assert_eq!(v["num_points"], N);
    assert_eq!(v["modes"].as_array().unwrap().len(), 5);
    let (status, bytes) = call(&app, Method::GET, "/openapi.json", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let doc = json_of(&bytes);
    for path in [
        "/sessions",
        "/sessions/{id}/invert",
        "/sessions/{id}/status",
        "/sessions/{id}/edits",
        "/sessions/{id}/edits/last",
        "/sessions/{id}/cloud",
    ] {
        assert!(doc["paths"].get(path).is_some(), "{path} undocumented");
    }
}

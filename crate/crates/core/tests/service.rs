mod common;

use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use candle_core::Device;
use common::random_strokes;
use serde_json::{json, Value};
use sketchrefine::inference::Session;
use sketchrefine::nn::{Generator, NetworkConfig, Renderer, RendererConfig};
use sketchrefine::service::router;
use sketchrefine::{Mask, Photo, SketchMap};
use tower::ServiceExt;

const RES: usize = 256;

fn session() -> Arc<Session> {
    static SESSION: OnceLock<Arc<Session>> = OnceLock::new();
    SESSION
        .get_or_init(|| {
            let g = Generator::new(&NetworkConfig::compact(RES).unwrap(), 1, &Device::Cpu).unwrap();
            let f = Renderer::new(&RendererConfig::new(RES, 2).unwrap(), 2, &Device::Cpu).unwrap();
            Arc::new(Session::new(g, Some(f), 10.0).unwrap())
        })
        .clone()
}

async fn call(method: &str, uri: &str, body: Body, limit: usize) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = router(session(), limit).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    call("POST", uri, Body::from(body.to_string()), 1 << 24).await
}

async fn get(uri: &str) -> (StatusCode, Value) {
    call("GET", uri, Body::empty(), 1 << 24).await
}

fn png_sketch(seed: u64) -> String {
    B64.encode(random_strokes(RES, RES, 6, seed).to_png_bytes().unwrap())
}

fn error_kind(v: &Value) -> &str {
    v["error"]["kind"].as_str().unwrap_or("")
}

#[tokio::test]
async fn health_and_model_info() {
    let (status, body) = get("/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, body) = get("/model-info").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["resolution"], 256);
    assert_eq!(body["max_radius"], 10.0);
    assert_eq!(body["mode"], "edit");
    assert_eq!(body["renderer"], true);
}

#[tokio::test]
async fn debug_radius_reports_the_scaled_radius() {
    let (status, body) = get("/debug/radius?level=0.5").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["radius"], 5.0);
    let (status, body) = get("/debug/radius?level=1.5").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "invalid_argument");
    let (status, body) = get("/debug/radius?level=abc").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "invalid_query");
}

#[tokio::test]
async fn refine_returns_a_deterministic_sketch_of_the_input_size() {
    let body = json!({ "sketch": png_sketch(3), "level": 0.7 });
    let (status, a) = post("/refine", body.clone()).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    assert_eq!(
        (a["width"].as_u64(), a["height"].as_u64()),
        (Some(256), Some(256))
    );
    assert!((a["radius"].as_f64().unwrap() - 7.0).abs() < 1e-12);
    let png = B64.decode(a["refined_sketch"].as_str().unwrap()).unwrap();
    assert_eq!(SketchMap::from_png_bytes(&png).unwrap().dims(), (256, 256));
    let (_, b) = post("/refine", body).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn malformed_requests_get_structured_errors() {
    let (status, body) = call("POST", "/refine", Body::from("{not json"), 1 << 24).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "malformed_json");

    let (status, body) = post("/refine", json!({ "sketch": B64.encode(b"not a png") })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "malformed_png");

    let (status, body) = post("/refine", json!({ "sketch": "@@@" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "malformed_base64");

    let (status, body) = post("/refine", json!({ "sketch": png_sketch(1), "level": -0.1 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "invalid_argument");

    let small = B64.encode(SketchMap::zeros(32, 32).to_png_bytes().unwrap());
    let (status, body) = post("/refine", json!({ "sketch": small })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "invalid_argument");

    let (status, body) = post("/refine", json!({ "sketch": png_sketch(1), "extra": 1 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "malformed_json");
}

#[tokio::test]
async fn oversized_bodies_are_rejected() {
    let body = json!({ "sketch": "A".repeat(4096) }).to_string();
    let (status, v) = call("POST", "/refine", Body::from(body), 1024).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(error_kind(&v), "payload_too_large");
}

#[tokio::test]
async fn edit_requires_photo_and_mask() {
    let (status, body) = post("/edit", json!({ "sketch": png_sketch(2) })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "invalid_argument");
}

#[tokio::test]
async fn edit_keeps_the_known_region() {
    let photo = Photo::from_fn(RES, RES, |c, y, x| {
        ((y + 2 * x + 3 * c) % 17) as f64 / 8.0 - 1.0
    });
    let photo = Photo::from_png_bytes(&photo.to_png_bytes().unwrap()).unwrap();
    let mask = Mask::from_fn(RES, RES, |y, x| {
        (64..192).contains(&y) && (64..192).contains(&x)
    });
    let body = json!({
        "photo": B64.encode(photo.to_png_bytes().unwrap()),
        "mask": B64.encode(mask.to_png_bytes().unwrap()),
        "sketch": png_sketch(5),
        "returns": ["final_photo"],
    });
    let (status, v) = post("/edit", body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(v.get("refined_sketch").is_none() && v.get("generated_photo").is_none());
    let out =
        Photo::from_png_bytes(&B64.decode(v["final_photo"].as_str().unwrap()).unwrap()).unwrap();
    for y in 0..RES {
        for x in 0..RES {
            if !mask.get(y, x) {
                for c in 0..3 {
                    assert_eq!(out.get(c, y, x), photo.get(c, y, x));
                }
            }
        }
    }
}

#[tokio::test]
async fn synth_runs_on_an_edit_model() {
    let (status, v) = post(
        "/synth",
        json!({ "sketch": png_sketch(4), "returns": ["generated_photo"] }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(v["generated_photo"].is_string());
    let (status, v) = post(
        "/synth",
        json!({ "sketch": png_sketch(4), "returns": ["nope"] }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&v), "invalid_argument");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_identical_requests_agree() {
    let body = json!({ "sketch": png_sketch(8), "level": 0.3 });
    let calls = (0..4).map(|_| post("/refine", body.clone()));
    let results = futures_join(calls.collect()).await;
    for (status, v) in &results {
        assert_eq!(*status, StatusCode::OK);
        assert_eq!(v, &results[0].1);
    }
}

async fn futures_join<F: std::future::Future<Output = (StatusCode, Value)> + Send + 'static>(
    futs: Vec<F>,
) -> Vec<(StatusCode, Value)> {
    let handles: Vec<_> = futs.into_iter().map(tokio::spawn).collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

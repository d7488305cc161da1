//! Local HTTP/JSON service over an inference [`Session`].
//!
//! | route | body | reply |
//! |---|---|---|
//! | `GET /health` | | `{"status":"ok"}` |
//! | `GET /model-info` | | `{"resolution", "max_radius", "mode", "renderer"}` |
//! | `GET /debug/radius?level=ℓ` | | `{"level", "radius"}` |
//! | `POST /refine` | `{"sketch", "mask"?, "level"?}` | `{"refined_sketch", "radius", "width", "height"}` |
//! | `POST /edit` | `{"photo", "mask", "sketch", "level"?, "returns"?}` | requested images + `"radius"` |
//! | `POST /synth` | `{"sketch", "level"?, "returns"?}` | requested images + `"radius"` |
//!
//! Images travel as base64-encoded PNGs. `level` defaults to 1. Failures
//! reply with `{"error": {"kind", "message"}}` and a 4xx/5xx status.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::inference::{EditRequest, EditResponse, ReturnSet, Session};
use crate::nn::GeneratorMode;
use crate::raster::{Mask, Photo, RefinementLevel, SketchMap};

/// Default request body limit: 16 MiB.
pub const DEFAULT_BODY_LIMIT: usize = 16 * 1024 * 1024;

/// Environment variable naming the default checkpoint directory.
pub const CHECKPOINT_DIR_ENV: &str = "SKETCHREFINE_CHECKPOINT_DIR";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Self::bad_request("invalid_argument", m),
            Error::Image(e) => Self::bad_request("malformed_png", e.to_string()),
            other => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                kind: "internal",
                message: other.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
struct AppState {
    session: Arc<Session>,
}

/// Builds the router; `body_limit` caps request sizes in bytes.
pub fn router(session: Arc<Session>, body_limit: usize) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/model-info", get(model_info))
        .route("/debug/radius", get(debug_radius))
        .route("/refine", post(refine))
        .route("/edit", post(edit))
        .route("/synth", post(synth))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(AppState { session })
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, session: Arc<Session>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session, DEFAULT_BODY_LIMIT))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn model_info(State(st): State<AppState>) -> Json<Value> {
    let s = &st.session;
    Json(json!({
        "resolution": s.resolution(),
        "max_radius": s.max_radius(),
        "mode": s.mode(),
        "renderer": s.renderer().is_some(),
    }))
}

#[derive(Deserialize)]
struct RadiusQuery {
    level: f64,
}

async fn debug_radius(
    State(st): State<AppState>,
    query: Result<Query<RadiusQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(q) = query.map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))?;
    let level = RefinementLevel::new(q.level)?;
    Ok(Json(
        json!({ "level": level.value(), "radius": st.session.radius_for(level) }),
    ))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: Result<Bytes, BytesRejection>) -> ApiResult<T> {
    let bytes = body.map_err(|e| ApiError {
        status: e.status(),
        kind: if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            "payload_too_large"
        } else {
            "unreadable_body"
        },
        message: e.body_text(),
    })?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::bad_request("malformed_json", e.to_string()))
}

fn decode_b64(field: &str, text: &str) -> ApiResult<Vec<u8>> {
    B64.decode(text.trim())
        .map_err(|e| ApiError::bad_request("malformed_base64", format!("{field}: {e}")))
}

fn decode_png<T>(
    field: &str,
    text: &str,
    parse: impl FnOnce(&[u8]) -> crate::Result<T>,
) -> ApiResult<T> {
    parse(&decode_b64(field, text)?)
        .map_err(|e| ApiError::bad_request("malformed_png", format!("{field}: {e}")))
}

fn encode(bytes: crate::Result<Vec<u8>>) -> ApiResult<String> {
    Ok(B64.encode(bytes?))
}

fn level_of(level: Option<f64>) -> ApiResult<RefinementLevel> {
    Ok(RefinementLevel::new(level.unwrap_or(1.0))?)
}

fn returns_of(names: Option<Vec<String>>) -> ApiResult<ReturnSet> {
    match names {
        None => Ok(ReturnSet::ALL),
        Some(n) => Ok(ReturnSet::from_names(&n)?),
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> crate::Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: e.to_string(),
        })?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineBody {
    sketch: String,
    mask: Option<String>,
    level: Option<f64>,
}

#[derive(Serialize)]
struct RefineReply {
    refined_sketch: String,
    radius: f64,
    width: usize,
    height: usize,
}

async fn refine(
    State(st): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<RefineReply>> {
    let req: RefineBody = parse_body(body)?;
    let sketch = decode_png("sketch", &req.sketch, SketchMap::from_png_bytes)?;
    let mask = req
        .mask
        .as_deref()
        .map(|m| decode_png("mask", m, Mask::from_png_bytes))
        .transpose()?;
    let level = level_of(req.level)?;
    let session = st.session.clone();
    let (refined, radius) = blocking(move || session.refine(&sketch, mask.as_ref(), level)).await?;
    Ok(Json(RefineReply {
        width: refined.width(),
        height: refined.height(),
        refined_sketch: encode(refined.to_png_bytes())?,
        radius,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditBody {
    photo: Option<String>,
    mask: Option<String>,
    sketch: String,
    level: Option<f64>,
    returns: Option<Vec<String>>,
}

#[derive(Serialize)]
struct EditReply {
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_sketch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_photo: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_photo: Option<String>,
    radius: f64,
}

fn reply(resp: EditResponse) -> ApiResult<Json<EditReply>> {
    Ok(Json(EditReply {
        refined_sketch: resp
            .refined_sketch
            .map(|s| encode(s.to_png_bytes()))
            .transpose()?,
        generated_photo: resp
            .generated_photo
            .map(|p| encode(p.to_png_bytes()))
            .transpose()?,
        final_photo: resp
            .final_photo
            .map(|p| encode(p.to_png_bytes()))
            .transpose()?,
        radius: resp.radius,
    }))
}

async fn run_edit(st: AppState, body: EditBody, mode: GeneratorMode) -> ApiResult<Json<EditReply>> {
    let photo = body
        .photo
        .as_deref()
        .map(|p| decode_png("photo", p, Photo::from_png_bytes))
        .transpose()?;
    let mask = body
        .mask
        .as_deref()
        .map(|m| decode_png("mask", m, Mask::from_png_bytes))
        .transpose()?;
    let req = EditRequest {
        photo,
        mask,
        sketch: decode_png("sketch", &body.sketch, SketchMap::from_png_bytes)?,
        level: level_of(body.level)?,
        mode,
        returns: returns_of(body.returns)?,
    };
    let session = st.session.clone();
    reply(blocking(move || session.edit(&req)).await?)
}

async fn edit(
    State(st): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<EditReply>> {
    let body: EditBody = parse_body(body)?;
    if body.photo.is_none() || body.mask.is_none() {
        return Err(ApiError::bad_request(
            "invalid_argument",
            "edit requests need both photo and mask",
        ));
    }
    run_edit(st, body, GeneratorMode::Edit).await
}

async fn synth(
    State(st): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<EditReply>> {
    let body: EditBody = parse_body(body)?;
    run_edit(st, body, GeneratorMode::Synth).await
}

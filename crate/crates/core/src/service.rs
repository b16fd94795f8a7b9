//! HTTP JSON API over editing sessions.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::editing::{highlighted_faces, EditConfig, Editor, Session};
use crate::error::Error;
use crate::model::{Refiner, SketchModel};
use crate::render::{Camera, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    EmptySketch,
    EmptyShape,
    BadSelection,
    NoSession,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::EmptySketch | ErrorCode::EmptyShape => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::BadSelection | ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NoSession => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    /// Maps a pipeline error; argument errors count as selection errors in
    /// selection-driven operations.
    fn from_error(err: Error, selection_op: bool) -> Self {
        let code = match &err {
            Error::EmptySketch => ErrorCode::EmptySketch,
            Error::EmptyShape => ErrorCode::EmptyShape,
            Error::Argument(_) if selection_op => ErrorCode::BadSelection,
            Error::Argument(_) | Error::State(_) | Error::Format(_) | Error::Parse { .. } => ErrorCode::BadRequest,
            _ => ErrorCode::Internal,
        };
        Self::new(code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub struct AppState {
    pub editor: Editor,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(editor: Editor) -> Arc<Self> {
        Arc::new(Self {
            editor,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorCode::NoSession, format!("no session {id:?}")))
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn decode_sketch(b64: &str) -> Result<GrayImage, ApiError> {
    let bytes = B64
        .decode(b64.trim())
        .map_err(|e| ApiError::bad_request(format!("sketch is not base64: {e}")))?;
    GrayImage::from_png_bytes(&bytes).map_err(|e| ApiError::bad_request(format!("sketch is not a PNG: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SketchBody {
    sketch_png_base64: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectBody {
    part_ids: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyBody {}

/// Angles in degrees.
#[derive(Deserialize)]
struct OutlineQuery {
    azimuth: Option<f64>,
    elevation: Option<f64>,
}

/// Runs `f` on the locked session off the async workers.
async fn with_session<T, F>(state: &Arc<AppState>, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Editor, &mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let session = state.session(id)?;
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock().map_err(|_| ApiError::new(ErrorCode::Internal, "session lock poisoned"))?;
        f(&state.editor, &mut guard)
    })
    .await
    .map_err(|e| ApiError::new(ErrorCode::Internal, format!("worker failed: {e}")))?
}

async fn health() -> Response {
    Json(json!({"status": "ok", "model": "loaded"})).into_response()
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult {
    let id = format!("{:016x}", rand::random::<u64>());
    let session = state.editor.new_session(id.clone());
    state
        .sessions
        .lock()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({"session_id": id}))).into_response())
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    match state.sessions.lock().expect("session table lock").remove(&id) {
        Some(_) => Ok(Json(json!({"deleted": id})).into_response()),
        None => Err(ApiError::new(ErrorCode::NoSession, format!("no session {id:?}"))),
    }
}

async fn generate(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: SketchBody = parse(&body)?;
    let sketch = decode_sketch(&req.sketch_png_base64)?;
    let out = with_session(&state, &id, move |e, s| {
        e.generate(s, &sketch).map_err(|err| ApiError::from_error(err, false))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn select(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: SelectBody = parse(&body)?;
    let out = with_session(&state, &id, move |e, s| {
        let selected = e
            .select_parts(s, &req.part_ids)
            .map_err(|err| ApiError::from_error(err, true))?;
        let mesh = e.mesh(&s.current).map_err(|err| ApiError::from_error(err, false))?;
        Ok(json!({"selected": selected, "highlighted_faces": highlighted_faces(&mesh, &selected)}))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn refine(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let _: EmptyBody = parse(&body)?;
    let out = with_session(&state, &id, |e, s| {
        e.refine_selected(s).map_err(|err| ApiError::from_error(err, true))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn blend(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: SketchBody = parse(&body)?;
    let sketch = decode_sketch(&req.sketch_png_base64)?;
    let out = with_session(&state, &id, move |e, s| {
        if s.selected.is_empty() {
            return Err(ApiError::new(ErrorCode::BadSelection, "no parts selected"));
        }
        e.blend(s, &sketch).map_err(|err| ApiError::from_error(err, true))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn outline(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<OutlineQuery>,
) -> ApiResult {
    let png = with_session(&state, &id, move |e, s| {
        let camera = match (q.azimuth, q.elevation) {
            (None, None) => None,
            (az, el) => Some(Camera::orthographic(
                az.map_or(s.camera.azimuth, f64::to_radians),
                el.map_or(s.camera.elevation, f64::to_radians),
            )),
        };
        let sketch = e
            .outline_current(s, camera)
            .map_err(|err| ApiError::from_error(err, false))?;
        sketch.to_png_bytes().map_err(|err| ApiError::from_error(err, false))
    })
    .await?;
    Ok(Json(json!({"sketch_png_base64": B64.encode(png)})).into_response())
}

async fn undo(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let _: EmptyBody = parse(&body)?;
    let out = with_session(&state, &id, |e, s| e.undo(s).map_err(|err| ApiError::from_error(err, false))).await?;
    Ok(Json(out).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::BadRequest, "unknown endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", axum::routing::delete(delete_session))
        .route("/api/sessions/{id}/generate", post(generate))
        .route("/api/sessions/{id}/select", post(select))
        .route("/api/sessions/{id}/refine", post(refine))
        .route("/api/sessions/{id}/blend", post(blend))
        .route("/api/sessions/{id}/outline", get(outline))
        .route("/api/sessions/{id}/undo", post(undo))
        .fallback(not_found)
        .with_state(state)
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub bind: SocketAddr,
    pub model: PathBuf,
    pub refiner: Option<PathBuf>,
    pub grid_res: usize,
}

pub fn load_editor(cfg: &ServeConfig) -> crate::Result<Editor> {
    let model = SketchModel::load(&cfg.model)?;
    let refiner = cfg.refiner.as_deref().map(Refiner::load).transpose()?;
    let edit = EditConfig {
        grid_res: cfg.grid_res,
        ..EditConfig::default()
    };
    Editor::new(model, refiner, edit)
}

/// Serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> crate::Result<()> {
    let editor = load_editor(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(editor)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

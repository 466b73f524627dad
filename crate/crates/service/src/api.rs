//! HTTP routes under `/api`.

use std::sync::Arc;

use axum::async_trait;
use axum::extract::{FromRequest, Path, Request, State};
use axum::body::Bytes;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use base64::Engine as _;
use palettizer::extract::{extract_document, ExtractParams};
use palettizer::prefs::{recommend, Lexicon, PreferenceSet};
use palettizer::raster::{AnnotationSet, RasterImage};
use palettizer::recommender::Imputer;
use palettizer::doc::{validate_doc, Rule};
use palettizer::{featurize, BBox, ElementType, InfographicDoc, NodeKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{SeedPolicy, ServiceConfig};
use crate::error::{ApiError, ServiceError};
use crate::store::{now, Bookmark, HistoryEntry, PaletteView, Session, Store};

/// Largest request body (base64 PNGs included).
pub const BODY_LIMIT: usize = 16 * 1024 * 1024;
/// Largest image accepted by `/api/analyze`, in pixels.
pub const MAX_PIXELS: usize = 4096 * 4096;
pub const MAX_PALETTES: usize = 50;

#[derive(Clone)]
pub struct AppState {
    pub config: ServiceConfig,
    pub store: Arc<Store>,
    pub model: Arc<dyn Imputer + Send + Sync>,
    pub lexicon: Arc<Lexicon>,
}

impl AppState {
    pub fn from_config(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        Ok(Self {
            store: Arc::new(Store::open(&config.store_path)?),
            model: config.load_model()?,
            lexicon: Arc::new(config.load_lexicon()?),
            config,
        })
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

/// `Json` whose rejections use the structured error body. The payload must
/// be a JSON object (serde would otherwise accept arrays for structs).
pub struct ApiJson<T>(pub T);

#[async_trait]
impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<Value>::from_request(req, state).await?;
        from_object(value).map(Self)
    }
}

fn from_object<T: DeserializeOwned>(value: Value) -> Result<T, ApiError> {
    if !value.is_object() {
        return Err(ApiError::unprocessable("invalid_body", "request body must be a JSON object"));
    }
    serde_json::from_value(value).map_err(|e| ApiError::unprocessable("invalid_body", e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/lexicon", get(lexicon))
        .route("/api/analyze", post(analyze))
        .route("/api/documents/:id", get(get_document))
        .route("/api/recommend", post(recommend_palettes))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/:id", get(get_session))
        .route("/api/sessions/:id/choose", post(choose_palette))
        .route("/api/sessions/:id/bookmarks", post(add_bookmark).get(list_bookmarks))
        .route("/api/sessions/:id/bookmarks/:bookmark", delete(delete_bookmark))
        .fallback(|| async { ApiError::Http { status: StatusCode::NOT_FOUND, code: "no_route", message: "no such endpoint".into() } })
        .layer(axum::middleware::map_response(structure_errors))
        .layer(axum::extract::DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Rewrite bare framework error responses (405, 413, ...) into the
/// structured error body.
async fn structure_errors(res: Response) -> Response {
    let status = res.status();
    let is_json = res
        .headers()
        .get(header::CONTENT_TYPE)
        .is_some_and(|v| v.as_bytes().starts_with(b"application/json"));
    if !(status.is_client_error() || status.is_server_error()) || is_json {
        return res;
    }
    let code = match status {
        StatusCode::METHOD_NOT_ALLOWED => "method_not_allowed",
        StatusCode::PAYLOAD_TOO_LARGE => "payload_too_large",
        StatusCode::UNSUPPORTED_MEDIA_TYPE => "unsupported_media_type",
        s if s.is_server_error() => "internal",
        _ => "bad_request",
    };
    let message = status.canonical_reason().unwrap_or("request failed").to_string();
    let mut out = ApiError::Http { status, code, message }.into_response();
    // Keep headers such as `Allow`.
    for (k, v) in res.headers() {
        if k != header::CONTENT_TYPE && k != header::CONTENT_LENGTH {
            out.headers_mut().insert(k.clone(), v.clone());
        }
    }
    out
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn lexicon(State(s): State<AppState>) -> Json<serde_json::Value> {
    let words: Vec<_> = s
        .lexicon
        .words()
        .map(|(w, e)| json!({ "word": w, "category": e.category, "colors": e.colors.iter().map(|c| c.to_hex()).collect::<Vec<_>>() }))
        .collect();
    Json(json!({ "words": words }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    /// Base64 PNG.
    pub image_png: String,
    #[serde(default)]
    pub annotations: AnnotationSet,
    pub session_id: Option<String>,
}

/// One rectangle of the layered tree widget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerNode {
    pub id: String,
    pub kind: NodeKind,
    pub element_type: Option<ElementType>,
    pub depth: usize,
    pub parent: Option<String>,
    pub bbox: BBox,
    pub color: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub doc_id: String,
    pub document: InfographicDoc,
    pub layers: Vec<LayerNode>,
}

fn layers(doc: &InfographicDoc) -> Result<Vec<LayerNode>, ApiError> {
    Ok(doc
        .preorder()?
        .iter()
        .map(|v| LayerNode {
            id: v.node.id.clone(),
            kind: v.node.kind,
            element_type: v.node.element_type,
            depth: v.depth,
            parent: v.parent.map(|p| p.id.clone()),
            bbox: v.node.bbox,
            color: v.node.color.map(|c| c.to_hex()),
        })
        .collect())
}

/// Structural validation of client-supplied documents.
fn check_document(doc: &InfographicDoc) -> Result<(), ApiError> {
    let violations = validate_doc(doc);
    if violations.is_empty() {
        return Ok(());
    }
    let code = if violations.iter().any(|v| v.rule == Rule::NodeCount) { "capacity" } else { "invalid_document" };
    Err(ApiError::Unprocessable {
        code,
        message: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        details: json!({ "violations": violations }),
    })
}

fn session_exists(s: &AppState, id: &str) -> Result<(), ApiError> {
    if s.store.read(|d| d.sessions.contains_key(id)) {
        Ok(())
    } else {
        Err(ApiError::not_found("session", id))
    }
}

async fn analyze(State(s): State<AppState>, ApiJson(req): ApiJson<AnalyzeRequest>) -> Result<impl IntoResponse, ApiError> {
    if let Some(id) = &req.session_id {
        session_exists(&s, id)?;
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(req.image_png.trim())
        .map_err(|e| ApiError::bad("invalid_base64", e.to_string()))?;
    let ann = req.annotations;
    let doc = tokio::task::spawn_blocking(move || -> Result<InfographicDoc, ApiError> {
        let img = RasterImage::decode_png(&bytes)?;
        if img.len() > MAX_PIXELS {
            return Err(ApiError::Http {
                status: StatusCode::PAYLOAD_TOO_LARGE,
                code: "image_too_large",
                message: format!("image has {} pixels, limit is {MAX_PIXELS}", img.len()),
            });
        }
        let doc = extract_document(&img, &ann, &ExtractParams::default())?;
        // Capacity check: the recommender can only encode MAX_NODES slots.
        featurize(&doc)?;
        Ok(doc)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;

    let layers = layers(&doc)?;
    let doc_id = uuid::Uuid::new_v4().to_string();
    s.store.update(|d| -> Result<(), ApiError> {
        d.documents.insert(doc_id.clone(), doc.clone());
        if let Some(sid) = &req.session_id {
            let session = d.sessions.get_mut(sid).ok_or_else(|| ApiError::not_found("session", sid))?;
            session.doc_id = Some(doc_id.clone());
        }
        Ok(())
    })?;
    Ok((StatusCode::CREATED, Json(AnalyzeResponse { doc_id, document: doc, layers })))
}

async fn get_document(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<AnalyzeResponse>, ApiError> {
    let doc = s
        .store
        .read(|d| d.documents.get(&id).cloned())
        .ok_or_else(|| ApiError::not_found("document", &id))?;
    Ok(Json(AnalyzeResponse {
        layers: layers(&doc)?,
        doc_id: id,
        document: doc,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    pub session_id: Option<String>,
    pub doc_id: Option<String>,
    /// Inline document, instead of `doc_id`.
    pub doc: Option<InfographicDoc>,
    #[serde(default)]
    pub prefs: PreferenceSet,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub palettes: Vec<PaletteView>,
    pub seed: u64,
    pub session_id: Option<String>,
    /// Index of the recorded history entry.
    pub history_index: Option<usize>,
}

async fn recommend_palettes(
    State(s): State<AppState>,
    ApiJson(req): ApiJson<RecommendRequest>,
) -> Result<Json<RecommendResponse>, ApiError> {
    let n = req.n.unwrap_or(s.config.default_n);
    if n == 0 || n > MAX_PALETTES {
        return Err(ApiError::Unprocessable {
            code: "invalid_n",
            message: format!("n must lie in 1..={MAX_PALETTES}"),
            details: json!({ "n": n }),
        });
    }
    let session_doc = match &req.session_id {
        Some(id) => s
            .store
            .read(|d| d.sessions.get(id).map(|x| x.doc_id.clone()))
            .ok_or_else(|| ApiError::not_found("session", id))?,
        None => None,
    };
    let doc = match (req.doc, req.doc_id.or(session_doc)) {
        (Some(_), Some(_)) if req.session_id.is_none() => {
            return Err(ApiError::bad("ambiguous_document", "give either doc or doc_id, not both"))
        }
        (Some(doc), _) => {
            check_document(&doc)?;
            doc
        }
        (None, Some(id)) => s
            .store
            .read(|d| d.documents.get(&id).cloned())
            .ok_or_else(|| ApiError::not_found("document", &id))?,
        (None, None) => return Err(ApiError::bad("missing_document", "doc or doc_id is required")),
    };
    let seed = req.seed.unwrap_or_else(|| match s.config.seed_policy {
        SeedPolicy::Fixed { seed } => seed,
        SeedPolicy::PerRequest => rand::random(),
    });

    let (model, lexicon, prefs) = (s.model.clone(), s.lexicon.clone(), req.prefs.clone());
    let palettes = tokio::task::spawn_blocking(move || recommend(&doc, &prefs, n, model.as_ref(), &lexicon, seed))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let palettes: Vec<PaletteView> = palettes.into_iter().map(PaletteView::new).collect();

    let history_index = match &req.session_id {
        Some(id) => Some(s.store.update(|d| -> Result<usize, ApiError> {
            let session = d.sessions.get_mut(id).ok_or_else(|| ApiError::not_found("session", id))?;
            session.prefs = req.prefs.clone();
            session.history.push(HistoryEntry {
                prefs: req.prefs.clone(),
                palettes: palettes.clone(),
                chosen: None,
                timestamp: now(),
            });
            Ok(session.history.len() - 1)
        })?),
        None => None,
    };
    Ok(Json(RecommendResponse {
        palettes,
        seed,
        session_id: req.session_id,
        history_index,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub doc_id: Option<String>,
}

/// The body is optional; when present it must be a JSON object.
async fn create_session(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = if body.is_empty() {
        CreateSession::default()
    } else {
        let is_json = headers
            .get(header::CONTENT_TYPE)
            .is_some_and(|v| v.as_bytes().starts_with(b"application/json"));
        if !is_json {
            return Err(ApiError::Http {
                status: StatusCode::UNSUPPORTED_MEDIA_TYPE,
                code: "unsupported_media_type",
                message: "expected an application/json body".into(),
            });
        }
        let value: Value = serde_json::from_slice(&body).map_err(|e| ApiError::bad("malformed_json", e.to_string()))?;
        from_object(value)?
    };
    let doc_id = req.doc_id;
    let session = s.store.update(|d| -> Result<Session, ApiError> {
        if let Some(id) = &doc_id {
            if !d.documents.contains_key(id) {
                return Err(ApiError::not_found("document", id));
            }
        }
        let session = Session::new(doc_id.clone());
        d.sessions.insert(session.id.clone(), session.clone());
        Ok(session)
    })?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    s.store
        .read(|d| d.sessions.get(&id).cloned())
        .map(Json)
        .ok_or_else(|| ApiError::not_found("session", id))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChooseRequest {
    pub palette_id: String,
}

async fn choose_palette(
    State(s): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<ChooseRequest>,
) -> Result<Json<HistoryEntry>, ApiError> {
    s.store
        .update(|d| -> Result<HistoryEntry, ApiError> {
            let session = d.sessions.get_mut(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
            let (i, _) = session
                .find_palette(&req.palette_id)
                .ok_or_else(|| ApiError::not_found("palette", &req.palette_id))?;
            session.history[i].chosen = Some(req.palette_id.clone());
            Ok(session.history[i].clone())
        })
        .map(Json)
}

/// Bookmark a palette from the session's history, or an inline one.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookmarkRequest {
    pub palette_id: Option<String>,
    pub palette: Option<PaletteView>,
}

async fn add_bookmark(
    State(s): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<BookmarkRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let bookmark = s.store.update(|d| -> Result<Bookmark, ApiError> {
        let session = d.sessions.get_mut(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
        let palette = match (req.palette_id, req.palette) {
            (Some(pid), None) => session
                .find_palette(&pid)
                .map(|(_, p)| p.clone())
                .ok_or_else(|| ApiError::not_found("palette", pid))?,
            (None, Some(p)) => p,
            _ => return Err(ApiError::bad("invalid_bookmark", "give exactly one of palette_id and palette")),
        };
        let bookmark = Bookmark {
            id: uuid::Uuid::new_v4().to_string(),
            palette,
            created_at: now(),
        };
        session.bookmarks.push(bookmark.clone());
        Ok(bookmark)
    })?;
    Ok((StatusCode::CREATED, Json(bookmark)))
}

async fn list_bookmarks(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<Bookmark>>, ApiError> {
    s.store
        .read(|d| d.sessions.get(&id).map(|x| x.bookmarks.clone()))
        .map(Json)
        .ok_or_else(|| ApiError::not_found("session", id))
}

async fn delete_bookmark(
    State(s): State<AppState>,
    Path((id, bookmark)): Path<(String, String)>,
) -> Result<StatusCode, ApiError> {
    s.store.update(|d| -> Result<(), ApiError> {
        let session = d.sessions.get_mut(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
        let before = session.bookmarks.len();
        session.bookmarks.retain(|b| b.id != bookmark);
        if session.bookmarks.len() == before {
            return Err(ApiError::not_found("bookmark", &bookmark));
        }
        Ok(())
    })?;
    Ok(StatusCode::NO_CONTENT)
}

/// Bind `config.listen` and serve until Ctrl-C.
pub async fn serve(state: AppState) -> Result<(), ServiceError> {
    let addr = state.config.listen.clone();
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| ServiceError::Io(addr.clone().into(), e))?;
    tracing::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(addr.into(), e))
}

use std::path::PathBuf;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use palettizer::error::{ExtractError, ModelError, PreferenceError, StructureError};
use serde_json::{json, Value};
use thiserror::Error;

/// Startup and storage failures.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("store file {0} is corrupt: {1}")]
    CorruptStore(PathBuf, String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
}

/// Anything an endpoint can answer with besides success. Rendered as
/// `{"error": {"status", "code", "message", ...details}}`.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { code: &'static str, message: String },
    #[error("{what} {id:?} not found")]
    NotFound { what: &'static str, id: String },
    #[error("{message}")]
    Unprocessable {
        code: &'static str,
        message: String,
        details: Value,
    },
    /// Errors raised by the HTTP layer itself (bad method, body limits...).
    #[error("{message}")]
    Http { status: StatusCode, code: &'static str, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn bad(code: &'static str, message: impl Into<String>) -> Self {
        Self::BadRequest { code, message: message.into() }
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::Unprocessable {
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn not_found(what: &'static str, id: impl Into<String>) -> Self {
        Self::NotFound { what, id: id.into() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest { .. } => StatusCode::BAD_REQUEST,
            Self::NotFound { .. } => StatusCode::NOT_FOUND,
            Self::Unprocessable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Http { status, .. } => *status,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::BadRequest { code, .. } | Self::Unprocessable { code, .. } | Self::Http { code, .. } => code,
            Self::NotFound { .. } => "not_found",
            Self::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> Value {
        let mut err = json!({
            "status": self.status().as_u16(),
            "code": self.code(),
            "message": self.to_string(),
        });
        match self {
            Self::NotFound { what, id } => {
                err["resource"] = json!(what);
                err["id"] = json!(id);
            }
            Self::Unprocessable { details: Value::Object(d), .. } => {
                for (k, v) in d {
                    err[k] = v.clone();
                }
            }
            _ => {}
        }
        json!({ "error": err })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let Self::Internal(msg) = &self {
            tracing::error!("{msg}");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let code = match &r {
            JsonRejection::JsonDataError(_) => "invalid_body",
            JsonRejection::JsonSyntaxError(_) => "malformed_json",
            JsonRejection::MissingJsonContentType(_) => "unsupported_media_type",
            _ => "unreadable_body",
        };
        Self::Http {
            status: r.status(),
            code,
            message: r.body_text(),
        }
    }
}

impl From<StructureError> for ApiError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::Capacity { count, max } => Self::Unprocessable {
                code: "capacity",
                message: e.to_string(),
                details: json!({ "count": count, "max": max }),
            },
            other => Self::unprocessable("invalid_document", other.to_string()),
        }
    }
}

impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Image(_) => Self::bad("invalid_image", e.to_string()),
            ExtractError::Structure(s) => s.into(),
            other => Self::bad("invalid_annotations", other.to_string()),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        Self::unprocessable("invalid_request", e.to_string())
    }
}

impl From<PreferenceError> for ApiError {
    fn from(e: PreferenceError) -> Self {
        let message = e.to_string();
        let (code, details) = match e {
            PreferenceError::UnknownWord { word, suggestions } => {
                ("unknown_word", json!({ "word": word, "suggestions": suggestions }))
            }
            PreferenceError::UnknownNode(id) => ("unknown_node", json!({ "node": id })),
            PreferenceError::NotColorable(id) => ("not_colorable", json!({ "node": id })),
            PreferenceError::Conflicting(id) => ("conflicting_preference", json!({ "node": id })),
            PreferenceError::OverlappingBindings(id) => ("overlapping_bindings", json!({ "node": id })),
            PreferenceError::BindingConflict(set) => ("binding_conflict", json!({ "binding": set })),
            PreferenceError::NotConcrete => ("not_concrete", Value::Null),
            PreferenceError::BadLexicon(..) => ("bad_lexicon", Value::Null),
            PreferenceError::Model(m) => return m.into(),
            PreferenceError::Structure(s) => return s.into(),
        };
        Self::Unprocessable { code, message, details }
    }
}

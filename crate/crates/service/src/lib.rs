//! HTTP front end for the palettizer engine: document analysis,
//! preference-driven recommendation, sessions with history and bookmarks.
//!
//! All routes live under `/api`; every error is a JSON body of the form
//! `{"error": {"status", "code", "message", ...}}`.

pub mod api;
pub mod config;
mod error;
pub mod store;

pub use api::{router, serve, AppState};
pub use config::{SeedPolicy, ServiceConfig, CONFIG_ENV};
pub use error::{ApiError, ServiceError};
pub use store::{Bookmark, HistoryEntry, PaletteView, Session, Store};

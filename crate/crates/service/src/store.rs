//! Sessions, bookmarks and analyzed documents in one JSON file.
//!
//! Every mutation is applied to a copy, written to a sibling temp file,
//! fsynced and renamed over the store, and only then made visible; a failed
//! write leaves both disk and memory unchanged.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use palettizer::prefs::{Palette, PreferenceSet};
use palettizer::InfographicDoc;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const STORE_FORMAT: &str = "palettizer-store/1";

/// A palette as sent to clients: hex colors plus the Lab originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteView {
    pub id: String,
    pub colors: BTreeMap<String, String>,
    #[serde(flatten)]
    pub palette: Palette,
}

impl PaletteView {
    pub fn new(palette: Palette) -> Self {
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            colors: palette.to_hex(),
            palette,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub prefs: PreferenceSet,
    pub palettes: Vec<PaletteView>,
    pub chosen: Option<String>,
    /// Unix seconds.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bookmark {
    pub id: String,
    pub palette: PaletteView,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub doc_id: Option<String>,
    pub prefs: PreferenceSet,
    /// Append-only.
    pub history: Vec<HistoryEntry>,
    pub bookmarks: Vec<Bookmark>,
    pub created_at: u64,
}

impl Session {
    pub fn new(doc_id: Option<String>) -> Self {
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            doc_id,
            prefs: PreferenceSet::default(),
            history: Vec::new(),
            bookmarks: Vec::new(),
            created_at: now(),
        }
    }

    pub fn find_palette(&self, palette_id: &str) -> Option<(usize, &PaletteView)> {
        self.history
            .iter()
            .enumerate()
            .find_map(|(i, h)| h.palettes.iter().find(|p| p.id == palette_id).map(|p| (i, p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreData {
    pub format: String,
    pub documents: BTreeMap<String, InfographicDoc>,
    pub sessions: BTreeMap<String, Session>,
}

impl Default for StoreData {
    fn default() -> Self {
        Self {
            format: STORE_FORMAT.into(),
            documents: BTreeMap::new(),
            sessions: BTreeMap::new(),
        }
    }
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    data: Mutex<StoreData>,
}

impl Store {
    /// Open `path`, starting empty when the file does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        let data = match std::fs::read_to_string(&path) {
            Ok(text) => {
                let data: StoreData =
                    serde_json::from_str(&text).map_err(|e| ServiceError::CorruptStore(path.clone(), e.to_string()))?;
                if data.format != STORE_FORMAT {
                    return Err(ServiceError::CorruptStore(path, format!("unknown format {:?}", data.format)));
                }
                data
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreData::default(),
            Err(e) => return Err(ServiceError::Io(path, e)),
        };
        Ok(Self {
            path,
            data: Mutex::new(data),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read<T>(&self, f: impl FnOnce(&StoreData) -> T) -> T {
        f(&self.data.lock().unwrap_or_else(|e| e.into_inner()))
    }

    /// Apply `f` and persist. If `f` fails nothing is written.
    pub fn update<T, E>(&self, f: impl FnOnce(&mut StoreData) -> Result<T, E>) -> Result<T, E>
    where
        E: From<ServiceError>,
    {
        let mut guard = self.data.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = guard.clone();
        let out = f(&mut next)?;
        self.persist(&next)?;
        *guard = next;
        Ok(out)
    }

    fn persist(&self, data: &StoreData) -> Result<(), ServiceError> {
        let io = |e| ServiceError::Io(self.path.clone(), e);
        let dir = match self.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let name = self.path.file_name().map_or("store".into(), |n| n.to_string_lossy().into_owned());
        let tmp = dir.join(format!(".{name}.tmp"));
        let bytes = serde_json::to_vec(data).map_err(|e| ServiceError::Config(e.to_string()))?;
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(&bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, &self.path).map_err(io)?;
        Ok(())
    }
}

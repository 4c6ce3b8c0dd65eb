use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use curate::preference::PosteriorSnapshot;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{Event, Session};

/// On-disk form of a session: its event log plus the posterior it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub id: String,
    pub events: Vec<Event>,
    pub posterior: PosteriorSnapshot,
}

/// In-memory sessions, each behind its own lock, optionally mirrored to
/// `<data_dir>/<id>.json` after every mutation.
#[derive(Debug, Default)]
pub struct Store {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    data_dir: Option<PathBuf>,
}

pub fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Store {
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// Opens `dir`, creating it if needed, and replays every stored session.
    /// A replay that disagrees with its stored posterior is an error.
    pub fn open(dir: &Path) -> Result<Self, ApiError> {
        std::fs::create_dir_all(dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| ApiError::internal(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let file: SessionFile = std::fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
                .map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
            let session = Session::replay(file.id.clone(), &file.events)?;
            if session.snapshot(false) != file.posterior {
                return Err(ApiError::internal(format!("{}: replayed posterior differs from the stored one", path.display())));
            }
            sessions.insert(file.id, Arc::new(Mutex::new(session)));
        }
        Ok(Store { sessions: RwLock::new(sessions), data_dir: Some(dir.to_path_buf()) })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }

    pub fn insert(&self, session: Session) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.persist(&session)?;
        let id = session.id().to_string();
        let handle = Arc::new(Mutex::new(session));
        self.sessions.write().expect("store lock").insert(id, handle.clone());
        Ok(handle)
    }

    /// Runs `f` with the session locked and writes the result to disk when
    /// `f` succeeds.
    pub fn mutate<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let handle = self.get(id)?;
        let mut s = handle.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
        let out = f(&mut s)?;
        self.persist(&s)?;
        Ok(out)
    }

    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ApiError> {
        let handle = self.get(id)?;
        let s = handle.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
        Ok(f(&s))
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        let file = SessionFile { id: s.id().to_string(), events: s.events().to_vec(), posterior: s.snapshot(false) };
        let bytes = serde_json::to_vec_pretty(&file).map_err(|e| ApiError::internal(e.to_string()))?;
        let tmp = dir.join(format!("{}.json.tmp", s.id()));
        let dst = dir.join(format!("{}.json", s.id()));
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, &dst))
            .map_err(|e| ApiError::internal(format!("{}: {e}", dst.display())))
    }
}

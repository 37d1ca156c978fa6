use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;

use super::session::{Quotas, Session};
use crate::edit::{CandidateEdit, SeedExample};
use crate::error::{Error, Result};
use crate::jsonl;

struct Entry {
    session: Session,
    persisted: usize,
}

/// Sessions keyed by id, each persisted as an append-only JSONL event log
/// `<dir>/<session_id>.jsonl`.
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore {
            dir: None,
            sessions: RwLock::new(BTreeMap::new()),
        }
    }

    /// Opens a store directory, replaying every session log found in it.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut sessions = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            let session = Session::replay(jsonl::read(&p)?)?;
            let persisted = session.events().len();
            sessions.insert(
                session.session_id().to_string(),
                Arc::new(Mutex::new(Entry { session, persisted })),
            );
        }
        Ok(SessionStore {
            dir: Some(dir.to_path_buf()),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().unwrap().keys().cloned().collect()
    }

    pub fn create(
        &self,
        feature_id: &str,
        seeds: Vec<SeedExample>,
        candidates: Vec<CandidateEdit>,
        quotas: Quotas,
    ) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::start(id.clone(), feature_id, seeds, candidates, quotas, Utc::now())?;
        let mut entry = Entry { session, persisted: 0 };
        self.flush(&mut entry)?;
        self.sessions.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(entry)));
        Ok(id)
    }

    /// Read-only access.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T> {
        let entry = self.entry(id)?;
        let guard = entry.lock().unwrap();
        Ok(f(&guard.session))
    }

    /// Runs a mutation and appends any new events to the session's log.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let entry = self.entry(id)?;
        let mut guard = entry.lock().unwrap();
        let out = f(&mut guard.session);
        self.flush(&mut guard)?;
        out
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    fn flush(&self, entry: &mut Entry) -> Result<()> {
        let events = &entry.session.events()[entry.persisted..];
        if events.is_empty() {
            return Ok(());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.jsonl", entry.session.session_id()));
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            f.write_all(jsonl::to_string(events).as_bytes())
                .map_err(|e| Error::io(&path, e))?;
        }
        entry.persisted = entry.session.events().len();
        Ok(())
    }
}

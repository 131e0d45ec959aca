//! Profiles and sessions, optionally mirrored to an append-only JSONL file.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mealmind::{Session, UserProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt store {path} at line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Profile { profile: UserProfile },
    Session { session: Box<Session> },
}

#[derive(Debug, Default)]
pub struct Store {
    profiles: BTreeMap<String, UserProfile>,
    sessions: HashMap<String, Arc<Session>>,
    latest: HashMap<String, String>,
    next_profile: u64,
    next_session: u64,
    file: Option<(PathBuf, File)>,
}

/// Numeric suffix of generated ids such as `s-12`.
fn counter(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replay `path` if it exists, then keep appending to it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let io_err = |source| StoreError::Io { path: path.to_path_buf(), source };
        let mut store = Self::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                store.apply(record);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        store.file = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn apply(&mut self, record: Record) {
        match record {
            Record::Profile { profile } => {
                if let Some(n) = counter(&profile.id, "p-") {
                    self.next_profile = self.next_profile.max(n);
                }
                self.profiles.insert(profile.id.clone(), profile);
            }
            Record::Session { session } => {
                if let Some(n) = counter(&session.session_id, "s-") {
                    self.next_session = self.next_session.max(n);
                }
                self.latest.insert(session.profile_id().to_string(), session.session_id.clone());
                self.sessions.insert(session.session_id.clone(), Arc::new(*session));
            }
        }
    }

    fn append(&mut self, record: &Record) -> Result<(), StoreError> {
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_string(record).expect("store records serialize");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| StoreError::Io { path: path.clone(), source })?;
        }
        Ok(())
    }

    pub fn next_profile_id(&mut self) -> String {
        loop {
            self.next_profile += 1;
            let id = format!("p-{}", self.next_profile);
            if !self.profiles.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn next_session_id(&mut self) -> String {
        self.next_session += 1;
        format!("s-{}", self.next_session)
    }

    /// Insert or replace a profile. Existing sessions keep the snapshot they were built from.
    pub fn put_profile(&mut self, profile: UserProfile) -> Result<(), StoreError> {
        let record = Record::Profile { profile };
        self.append(&record)?;
        self.apply(record);
        Ok(())
    }

    pub fn put_session(&mut self, session: Session) -> Result<Arc<Session>, StoreError> {
        let id = session.session_id.clone();
        let record = Record::Session { session: Box::new(session) };
        self.append(&record)?;
        self.apply(record);
        Ok(self.sessions[&id].clone())
    }

    pub fn profile(&self, id: &str) -> Option<&UserProfile> {
        self.profiles.get(id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &UserProfile> {
        self.profiles.values()
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.get(id).cloned()
    }

    pub fn latest_session(&self, profile_id: &str) -> Option<Arc<Session>> {
        self.latest.get(profile_id).and_then(|id| self.session(id))
    }
}

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use lipsync_core::PhonemeProfile;

#[derive(Debug, thiserror::Error)]
pub enum ProfileLoadError {
    #[error("cannot read profile directory {path}: {source}")]
    Dir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read profile {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid profile {path}: {source}")]
    Invalid {
        path: PathBuf,
        source: lipsync_core::ClassifierError,
    },
    #[error("default profile {0:?} is not installed")]
    UnknownDefault(String),
}

/// Installed profiles keyed by id (the file name without `.json`).
#[derive(Debug, Default)]
pub struct ProfileStore {
    profiles: BTreeMap<String, Arc<PhonemeProfile>>,
    default_id: Option<String>,
}

impl ProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.json` file in `dir`. Any unreadable or invalid file
    /// fails the whole load.
    pub fn load_dir(dir: &Path) -> Result<Self, ProfileLoadError> {
        let entries = std::fs::read_dir(dir).map_err(|source| ProfileLoadError::Dir {
            path: dir.to_owned(),
            source,
        })?;
        let mut store = ProfileStore::new();
        for entry in entries {
            let path = entry
                .map_err(|source| ProfileLoadError::Dir {
                    path: dir.to_owned(),
                    source,
                })?
                .path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") || !path.is_file() {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            let bytes = std::fs::read(&path).map_err(|source| ProfileLoadError::Read {
                path: path.clone(),
                source,
            })?;
            let profile = PhonemeProfile::from_json(&bytes)
                .map_err(|source| ProfileLoadError::Invalid { path, source })?;
            store.insert(id, profile);
        }
        Ok(store)
    }

    pub fn insert(&mut self, id: impl Into<String>, profile: PhonemeProfile) {
        self.profiles.insert(id.into(), Arc::new(profile));
    }

    pub fn set_default(&mut self, id: &str) -> Result<(), ProfileLoadError> {
        if !self.profiles.contains_key(id) {
            return Err(ProfileLoadError::UnknownDefault(id.to_owned()));
        }
        self.default_id = Some(id.to_owned());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<Arc<PhonemeProfile>> {
        self.profiles.get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.profiles.keys().cloned().collect()
    }

    /// The configured default, else the alphabetically first profile.
    pub fn default_profile(&self) -> Option<(String, Arc<PhonemeProfile>)> {
        let id = self
            .default_id
            .clone()
            .or_else(|| self.profiles.keys().next().cloned())?;
        let profile = self.profiles.get(&id)?.clone();
        Some((id, profile))
    }
}

/// Uploaded WAV bytes, served back for synchronised client playback.
#[derive(Debug, Default)]
pub struct AudioStore {
    inner: Mutex<HashMap<String, Bytes>>,
}

impl AudioStore {
    pub fn put(&self, session_id: &str, bytes: Bytes) {
        self.inner
            .lock()
            .expect("audio store poisoned")
            .insert(session_id.to_owned(), bytes);
    }

    pub fn get(&self, session_id: &str) -> Option<Bytes> {
        self.inner
            .lock()
            .expect("audio store poisoned")
            .get(session_id)
            .cloned()
    }

    pub fn remove(&self, session_id: &str) {
        self.inner
            .lock()
            .expect("audio store poisoned")
            .remove(session_id);
    }
}

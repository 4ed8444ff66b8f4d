use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::TranslateError;
use crate::normalize::Fingerprint;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub fingerprint: Fingerprint,
    pub target: String,
    pub backend: String,
}

impl CacheKey {
    pub fn new(fingerprint: Fingerprint, target: &str, backend: &str) -> Self {
        Self {
            fingerprint,
            target: target.to_string(),
            backend: backend.to_string(),
        }
    }
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationCacheEntry {
    pub fingerprint: Fingerprint,
    pub target: String,
    pub backend: String,
    pub translated_text: String,
    pub timestamp: String,
}

/// Translation cache, optionally persisted as append-only JSONL.
///
/// Readers share a lock; writers are serialized. When the file holds more
/// than one line for a key the last one wins.
pub struct TranslationCache {
    entries: RwLock<HashMap<CacheKey, String>>,
    file: Mutex<Option<BufWriter<File>>>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self, TranslateError> {
        let io = |e: std::io::Error| TranslateError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: TranslationCacheEntry = serde_json::from_str(&line)
                    .map_err(|e| TranslateError::Cache(format!("{} line {}: {e}", path.display(), i + 1)))?;
                entries.insert(CacheKey::new(e.fingerprint, &e.target, &e.backend), e.translated_text);
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            entries: RwLock::new(entries),
            file: Mutex::new(Some(BufWriter::new(file))),
        })
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, key: CacheKey, text: String) -> Result<(), TranslateError> {
        self.insert_many(vec![(key, text)])
    }

    pub fn insert_many(&self, items: Vec<(CacheKey, String)>) -> Result<(), TranslateError> {
        if items.is_empty() {
            return Ok(());
        }
        let mut file = self.file.lock().expect("cache file lock");
        if let Some(w) = file.as_mut() {
            let timestamp = chrono::Utc::now().to_rfc3339();
            for (k, t) in &items {
                let entry = TranslationCacheEntry {
                    fingerprint: k.fingerprint,
                    target: k.target.clone(),
                    backend: k.backend.clone(),
                    translated_text: t.clone(),
                    timestamp: timestamp.clone(),
                };
                let line = serde_json::to_string(&entry).map_err(|e| TranslateError::Cache(e.to_string()))?;
                writeln!(w, "{line}").map_err(|e| TranslateError::Cache(e.to_string()))?;
            }
            w.flush().map_err(|e| TranslateError::Cache(e.to_string()))?;
        }
        let mut entries = self.entries.write().expect("cache lock");
        entries.extend(items);
        Ok(())
    }
}

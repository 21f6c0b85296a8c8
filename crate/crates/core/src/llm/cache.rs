use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, ChatMessage, CompletionParams};

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    response: String,
}

/// Replays stored completions and records new ones to an append-only JSONL file.
pub struct CachedBackend<B> {
    inner: B,
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    file: Mutex<File>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

/// Stable key for a request: sha256 over its JSON encoding.
pub fn cache_key(messages: &[ChatMessage], params: &CompletionParams) -> String {
    let payload = serde_json::json!({ "messages": messages, "params": params });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

impl<B: Backend> CachedBackend<B> {
    pub fn open(inner: B, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let io = |e: std::io::Error| BackendError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: Entry = serde_json::from_str(&line)
                    .map_err(|e| BackendError::Cache(format!("{} line {}: {e}", path.display(), n + 1)))?;
                entries.insert(entry.key, entry.response);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(Self {
            inner,
            path,
            entries: Mutex::new(entries),
            file: Mutex::new(file),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        let key = cache_key(messages, params);
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let response = self.inner.complete(messages, params)?;

        let mut line = serde_json::to_string(&Entry {
            key: key.clone(),
            response: response.clone(),
        })
        .map_err(|e| BackendError::Cache(e.to_string()))?;
        line.push('\n');
        {
            let mut file = self.file.lock().unwrap();
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        self.entries.lock().unwrap().insert(key, response.clone());
        Ok(response)
    }

    fn timed(&self) -> bool {
        self.inner.timed()
    }
}

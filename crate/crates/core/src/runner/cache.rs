//! On-disk translation cache keyed by system and source-text hash.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    system_id: String,
    source_sha256: String,
    translation: String,
}

pub fn sha256_hex(data: impl AsRef<[u8]>) -> String {
    Sha256::digest(data.as_ref())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Entries are appended to a JSONL file as they are added; later lines win.
#[derive(Debug, Default)]
pub struct TranslationCache {
    path: Option<PathBuf>,
    entries: HashMap<(String, String), String>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) the cache file at `path`.
    pub fn open(path: &Path) -> Result<Self, JsonlError> {
        let mut cache = Self {
            path: Some(path.to_path_buf()),
            entries: HashMap::new(),
        };
        if path.exists() {
            for line in jsonl::read::<CacheLine>(path)? {
                cache
                    .entries
                    .insert((line.system_id, line.source_sha256), line.translation);
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, system_id: &str, source: &str) -> Option<&str> {
        self.entries
            .get(&(system_id.to_string(), sha256_hex(source)))
            .map(String::as_str)
    }

    pub fn insert(&mut self, system_id: &str, source: &str, translation: &str) -> Result<(), JsonlError> {
        let line = CacheLine {
            system_id: system_id.to_string(),
            source_sha256: sha256_hex(source),
            translation: translation.to_string(),
        };
        if let Some(path) = &self.path {
            jsonl::append(path, &line)?;
        }
        self.entries
            .insert((line.system_id, line.source_sha256), line.translation);
        Ok(())
    }
}

//! Content-addressed response cache: one JSON file per request digest,
//! written atomically (temp then rename) so concurrent workers never observe
//! a partial entry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FinishReason, LlmResponse};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    schema_version: u32,
    digest: String,
    request_tag: String,
    text: String,
    finish_reason: FinishReason,
    latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: &Path) -> ResponseCache {
        ResponseCache {
            dir: dir.to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Result<Option<LlmResponse>, String> {
        let path = self.entry_path(digest);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let entry: CacheEntry =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Some(LlmResponse {
            text: entry.text,
            finish_reason: entry.finish_reason,
            latency_ms: entry.latency_ms,
            from_cache: true,
        }))
    }

    pub fn put(&self, digest: &str, tag: &str, response: &LlmResponse) -> Result<(), String> {
        fs::create_dir_all(&self.dir).map_err(|e| format!("{}: {e}", self.dir.display()))?;
        let entry = CacheEntry {
            schema_version: 1,
            digest: digest.to_string(),
            request_tag: tag.to_string(),
            text: response.text.clone(),
            finish_reason: response.finish_reason,
            latency_ms: response.latency_ms,
        };
        let mut body = serde_json::to_string_pretty(&entry).map_err(|e| e.to_string())?;
        body.push('\n');
        let tmp = self.dir.join(format!("{digest}.tmp"));
        fs::write(&tmp, body).map_err(|e| format!("{}: {e}", tmp.display()))?;
        let target = self.entry_path(digest);
        fs::rename(&tmp, &target).map_err(|e| format!("{}: {e}", target.display()))?;
        Ok(())
    }
}

//! Content-addressed persistence of LLM exchanges.
//!
//! Entries live in one append-only JSON-lines file, `entries.jsonl`, inside
//! the store directory, one object per line:
//!
//! ```text
//! {"k":"<hex sha256>","req":{...},"resp":"..." | [..],"t":"<rfc3339>","sum":"<hex sha256>"}
//! ```
//!
//! `k` is the digest of the canonical request serialization and `sum` is the
//! digest of the line's bytes up to (but excluding) `,"sum":...`, closed with
//! `}`. Together they let [`verify`] detect any single-byte corruption.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_CACHE_DIR: &str = ".gptsm-cache";
pub const ENTRIES_FILE: &str = "entries.jsonl";

const SUM_MARKER: &str = ",\"sum\":\"";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache storage error at {path}: {reason}")]
    Storage { path: PathBuf, reason: String },
    #[error("cache entry {key} already holds a different response")]
    VersionConflict { key: CacheKey },
}

impl CacheError {
    fn storage(path: &Path, reason: impl ToString) -> Self {
        CacheError::Storage {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Chat,
    Embedding,
}

/// The request tuple that determines a cache key. Field order is the
/// canonical serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub endpoint: EndpointKind,
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub sample_index: u32,
}

impl RequestSummary {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request summary serializes")
    }

    pub fn key(&self) -> CacheKey {
        CacheKey(Sha256::digest(self.canonical_bytes()).into())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let mut out = [0u8; 32];
        // hex::decode accepts upper case; the store only ever writes lower case.
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return None;
        }
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(CacheKey(out))
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({})", self.to_hex())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CachedResponse {
    Text(String),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub request: RequestSummary,
    pub response: CachedResponse,
    pub created_at: String,
}

impl CacheEntry {
    pub fn new(request: RequestSummary, response: CachedResponse) -> Self {
        CacheEntry {
            key: request.key(),
            request,
            response,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }

    fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            k: String,
            req: &'a RequestSummary,
            resp: &'a CachedResponse,
            t: &'a str,
        }
        let body = serde_json::to_string(&Body {
            k: self.key.to_hex(),
            req: &self.request,
            resp: &self.response,
            t: &self.created_at,
        })
        .expect("cache entry serializes");
        let sum = hex::encode(Sha256::digest(body.as_bytes()));
        format!("{}{}{}\"}}", &body[..body.len() - 1], SUM_MARKER, sum)
    }

    fn from_line(line: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Body {
            k: String,
            req: RequestSummary,
            resp: CachedResponse,
            t: String,
        }
        let at = line.rfind(SUM_MARKER).ok_or("missing checksum")?;
        let sum = line[at + SUM_MARKER.len()..]
            .strip_suffix("\"}")
            .ok_or("malformed checksum field")?;
        let body = format!("{}}}", &line[..at]);
        let expect = hex::encode(Sha256::digest(body.as_bytes()));
        if sum != expect {
            return Err("checksum mismatch".into());
        }
        let parsed: Body = serde_json::from_str(&body).map_err(|e| format!("invalid JSON: {e}"))?;
        let key = CacheKey::from_hex(&parsed.k).ok_or("malformed key")?;
        if parsed.req.key() != key {
            return Err("key does not match request digest".into());
        }
        Ok(CacheEntry {
            key,
            request: parsed.req,
            response: parsed.resp,
            created_at: parsed.t,
        })
    }
}

/// Append-only JSON-lines store with an in-memory index.
pub struct CacheStore {
    dir: PathBuf,
    file_path: PathBuf,
    index: RwLock<HashMap<CacheKey, CacheEntry>>,
    writer: Mutex<File>,
}

impl fmt::Debug for CacheStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CacheStore").field("dir", &self.dir).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

impl CacheStore {
    /// Opens (creating if needed) the store in `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, CacheError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| CacheError::storage(&dir, e))?;
        let file_path = dir.join(ENTRIES_FILE);
        let mut index: HashMap<CacheKey, CacheEntry> = HashMap::new();
        if file_path.exists() {
            let f = File::open(&file_path).map_err(|e| CacheError::storage(&file_path, e))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| CacheError::storage(&file_path, format!("line {}: {e}", n + 1)))?;
                if line.is_empty() {
                    continue;
                }
                let entry = CacheEntry::from_line(&line)
                    .map_err(|e| CacheError::storage(&file_path, format!("line {}: {e}", n + 1)))?;
                match index.get(&entry.key) {
                    Some(prev) if prev.response != entry.response => {
                        return Err(CacheError::storage(
                            &file_path,
                            format!("line {}: conflicting duplicate of {}", n + 1, entry.key),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        index.insert(entry.key, entry);
                    }
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&file_path)
            .map_err(|e| CacheError::storage(&file_path, e))?;
        Ok(CacheStore {
            dir,
            file_path,
            index: RwLock::new(index),
            writer: Mutex::new(writer),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_path(&self) -> &Path {
        &self.file_path
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.index.read().expect("cache index poisoned").get(key).cloned()
    }

    /// Durably appends `entry`. Re-putting an identical response is a no-op.
    pub fn put(&self, entry: CacheEntry) -> Result<(), CacheError> {
        let mut writer = self.writer.lock().expect("cache writer poisoned");
        if let Some(prev) = self.get(&entry.key) {
            return if prev.response == entry.response {
                Ok(())
            } else {
                Err(CacheError::VersionConflict { key: entry.key })
            };
        }
        let mut line = entry.to_line();
        line.push('\n');
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.sync_data())
            .map_err(|e| CacheError::storage(&self.file_path, e))?;
        self.index
            .write()
            .expect("cache index poisoned")
            .insert(entry.key, entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        let bytes = fs::metadata(&self.file_path).map(|m| m.len()).unwrap_or(0);
        CacheStats {
            entries: self.len(),
            bytes,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub entries: usize,
    /// (1-based line number, reason)
    pub bad_lines: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.bad_lines.is_empty()
    }
}

/// Re-digests every line of the store in `dir` without loading it.
pub fn verify(dir: impl AsRef<Path>) -> Result<VerifyReport, CacheError> {
    let path = dir.as_ref().join(ENTRIES_FILE);
    let mut report = VerifyReport::default();
    if !path.exists() {
        return Ok(report);
    }
    let bytes = fs::read(&path).map_err(|e| CacheError::storage(&path, e))?;
    let mut seen: HashMap<CacheKey, CachedResponse> = HashMap::new();
    for (n, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        if raw.is_empty() {
            continue;
        }
        let line_no = n + 1;
        let parsed = std::str::from_utf8(raw)
            .map_err(|_| "invalid UTF-8".to_string())
            .and_then(CacheEntry::from_line);
        match parsed {
            Ok(entry) => {
                if let Some(prev) = seen.get(&entry.key) {
                    if *prev != entry.response {
                        report
                            .bad_lines
                            .push((line_no, "conflicting duplicate key".to_string()));
                    }
                    continue;
                }
                seen.insert(entry.key, entry.response);
                report.entries += 1;
            }
            Err(reason) => report.bad_lines.push((line_no, reason)),
        }
    }
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let last = bytes.split(|&b| b == b'\n').count();
        if !report.bad_lines.iter().any(|(n, _)| *n == last) {
            report.bad_lines.push((last, "unterminated line".to_string()));
        }
    }
    Ok(report)
}

//! Access to chat-completion and embedding endpoints.
//!
//! Backends implement [`ChatBackend`] / [`EmbeddingBackend`]; the
//! [`Gateway`] wraps them with the cache, bounded retries and a limit on
//! in-flight requests. Three backends ship here: an OpenAI-compatible HTTP
//! client, a deterministic [`MockChat`] driven by a script file, and a
//! hash-seeded [`HashEmbedder`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cache_store::{
    CacheEntry, CacheError, CacheStore, CachedResponse, EndpointKind, RequestSummary,
};
use crate::text_model::text_digest;

pub const DEFAULT_SAMPLE_COUNT: usize = 8;
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";

const PARAGRAPH_SLOT: &str = "{paragraph}";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("offline and no cached response in {}", .cache.display())]
    OfflineMiss { cache: PathBuf },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ShortenGp,
    ShortenNgp,
    GrammarGrade,
}

impl PromptKind {
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::ShortenGp => {
                "Delete spans of words or phrases from the following paragraph that don't contribute much to its meaning, but keep readability:\n{paragraph}\nPlease do not add any new words or change words, only delete words."
            }
            PromptKind::ShortenNgp => {
                "Delete spans of words or phrases from the following paragraph that don't contribute much to its meaning. Don't worry about grammar:\n{paragraph}\nPlease do not add any new words or change words, only delete words."
            }
            PromptKind::GrammarGrade => {
                "Score the following paragraph by how grammatical it is.\n{paragraph}\nAnswer A for grammatically correct, B for moderately grammatical, and C for bad grammar. Only respond with one letter."
            }
        }
    }

    /// Fills the template. The paragraph is inserted once, unmodified.
    pub fn render(self, paragraph: &str) -> String {
        let (head, tail) = self
            .template()
            .split_once(PARAGRAPH_SLOT)
            .expect("every template has a paragraph slot");
        let mut s = String::with_capacity(head.len() + paragraph.len() + tail.len());
        s.push_str(head);
        s.push_str(paragraph);
        s.push_str(tail);
        s
    }

    pub fn is_shorten(self) -> bool {
        !matches!(self, PromptKind::GrammarGrade)
    }
}

/// Routing information for scripted backends; live backends ignore it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptTag {
    /// Hex SHA-256 of the original (level-0) paragraph text.
    pub paragraph_digest: String,
    /// 1-based compression round.
    pub round: u32,
    /// Candidate index within the round (grammar grading only).
    pub candidate: usize,
}

#[derive(Clone, Debug)]
pub struct ChatRequest {
    pub kind: PromptKind,
    /// Text substituted into the template.
    pub paragraph: String,
    pub prompt_text: String,
    pub temperature: f64,
    pub sample_count: usize,
    pub tag: Option<ScriptTag>,
}

impl ChatRequest {
    pub fn new(kind: PromptKind, paragraph: impl Into<String>) -> Self {
        let paragraph = paragraph.into();
        ChatRequest {
            kind,
            prompt_text: kind.render(&paragraph),
            paragraph,
            temperature: DEFAULT_TEMPERATURE,
            sample_count: DEFAULT_SAMPLE_COUNT,
            tag: None,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_tag(mut self, tag: ScriptTag) -> Self {
        self.tag = Some(tag);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait ChatBackend: Send + Sync {
    /// Identity used in cache keys in place of the request's model id.
    fn id(&self) -> String;
    fn sample(&self, req: &ChatRequest, sample_index: u32) -> Result<String, GatewayError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

/// Parses a grade reply: the first standalone letter A, B or C
/// (case-insensitive), mapped to 1.0, 0.5 and 0.0.
pub fn parse_grade(reply: &str) -> Option<f64> {
    reply
        .split(|c: char| !c.is_alphabetic())
        .find_map(|w| match w {
            "A" | "a" => Some(1.0),
            "B" | "b" => Some(0.5),
            "C" | "c" => Some(0.0),
            _ => None,
        })
}

// ---------------------------------------------------------------------------
// Mock backends

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MockScriptEntry {
    pub kind: PromptKind,
    /// Hex SHA-256 of the original paragraph text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph: Option<String>,
    /// Alternative to `paragraph`: the paragraph text itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph_text: Option<String>,
    pub round: u32,
    pub responses: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MockScriptFile {
    pub entries: Vec<MockScriptEntry>,
}

/// Scripted responses keyed by (prompt kind, paragraph digest, round).
#[derive(Clone, Debug, Default)]
pub struct MockScript {
    entries: HashMap<(PromptKind, String, u32), Vec<String>>,
    digest: String,
}

impl MockScript {
    pub fn new() -> Self {
        let mut s = Self::default();
        s.refresh_digest();
        s
    }

    pub fn from_file_data(file: MockScriptFile) -> Result<Self, GatewayError> {
        let mut script = MockScript::new();
        for e in file.entries {
            let digest = match (e.paragraph, e.paragraph_text) {
                (Some(d), None) => d.to_ascii_lowercase(),
                (None, Some(t)) => text_digest(&t),
                _ => {
                    return Err(GatewayError::Backend(
                        "mock script entry needs exactly one of `paragraph` or `paragraph_text`".into(),
                    ))
                }
            };
            if e.responses.is_empty() {
                return Err(GatewayError::Backend(format!(
                    "mock script entry for round {} has no responses",
                    e.round
                )));
            }
            script.entries.insert((e.kind, digest, e.round), e.responses);
        }
        script.refresh_digest();
        Ok(script)
    }

    pub fn from_json(json: &str) -> Result<Self, GatewayError> {
        let file: MockScriptFile = serde_json::from_str(json)
            .map_err(|e| GatewayError::Backend(format!("invalid mock script: {e}")))?;
        Self::from_file_data(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Backend(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn insert(
        &mut self,
        kind: PromptKind,
        paragraph_text: &str,
        round: u32,
        responses: Vec<String>,
    ) -> &mut Self {
        assert!(!responses.is_empty(), "a script entry needs responses");
        self.entries
            .insert((kind, text_digest(paragraph_text), round), responses);
        self.refresh_digest();
        self
    }

    pub fn get(&self, kind: PromptKind, paragraph_digest: &str, round: u32) -> Option<&[String]> {
        self.entries
            .get(&(kind, paragraph_digest.to_string(), round))
            .map(Vec::as_slice)
    }

    fn refresh_digest(&mut self) {
        let mut keys: Vec<_> = self.entries.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        let mut h = Sha256::new();
        for ((kind, digest, round), responses) in keys {
            h.update(serde_json::to_vec(&(kind, digest, round, responses)).expect("serializable"));
        }
        self.digest = hex::encode(h.finalize());
    }
}

/// Deterministic chat backend. Echo mode returns the paragraph unchanged
/// (a refusal to cut) and grades everything "A". Scripted mode looks up
/// responses by (kind, paragraph digest, round): shorten requests take
/// `responses[sample_index % len]`, grade requests take
/// `responses[(candidate + sample_index) % len]`. Missing entries fall back
/// to echo behaviour.
#[derive(Clone, Debug)]
pub enum MockChat {
    Echo,
    Scripted(MockScript),
}

impl ChatBackend for MockChat {
    fn id(&self) -> String {
        match self {
            MockChat::Echo => "mock-echo".into(),
            MockChat::Scripted(s) => format!("mock-script:{}", &s.digest[..16]),
        }
    }

    fn sample(&self, req: &ChatRequest, sample_index: u32) -> Result<String, GatewayError> {
        let scripted = match (self, &req.tag) {
            (MockChat::Scripted(script), Some(tag)) => script
                .get(req.kind, &tag.paragraph_digest, tag.round)
                .map(|rs| {
                    let i = if req.kind.is_shorten() {
                        sample_index as usize
                    } else {
                        tag.candidate + sample_index as usize
                    };
                    rs[i % rs.len()].clone()
                }),
            _ => None,
        };
        Ok(scripted.unwrap_or_else(|| {
            if req.kind.is_shorten() {
                req.paragraph.clone()
            } else {
                "A".to_string()
            }
        }))
    }
}

/// Pseudo-random unit vectors seeded by the SHA-256 of the text.
#[derive(Clone, Copy, Debug)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 64 }
    }
}

impl EmbeddingBackend for HashEmbedder {
    fn id(&self) -> String {
        format!("mock-hash-{}", self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        let seed: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        let mut rng = ChaCha20Rng::from_seed(seed);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Stand-in for a network backend when running offline: every call is a
/// cache miss error naming the cache.
#[derive(Clone, Debug)]
pub struct OfflineBackend {
    pub id: String,
    pub cache: PathBuf,
}

impl ChatBackend for OfflineBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn sample(&self, _: &ChatRequest, _: u32) -> Result<String, GatewayError> {
        Err(GatewayError::OfflineMiss {
            cache: self.cache.clone(),
        })
    }
}

impl EmbeddingBackend for OfflineBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, _: &str) -> Result<Vec<f64>, GatewayError> {
        Err(GatewayError::OfflineMiss {
            cache: self.cache.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP backends

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the API key from the named environment variable, if set.
    pub fn with_key_from_env(mut self, var: &str) -> Self {
        self.api_key = std::env::var(var).ok().filter(|k| !k.is_empty());
        self
    }

    fn client(&self) -> Result<reqwest::blocking::Client, GatewayError> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))
    }

    fn post(
        &self,
        client: &reqwest::blocking::Client,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, GatewayError> {
        let mut rb = client.post(format!("{}/{}", self.base_url, path)).json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(GatewayError::Transport(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(GatewayError::Backend(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Backend(format!("unparseable response body: {e}")))
    }
}

/// OpenAI-style `POST {base}/chat/completions`, one request per sample.
pub struct HttpChat {
    config: HttpConfig,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpChat {
    pub fn new(config: HttpConfig, model: impl Into<String>) -> Result<Self, GatewayError> {
        Ok(HttpChat {
            client: config.client()?,
            config,
            model: model.into(),
        })
    }
}

impl ChatBackend for HttpChat {
    fn id(&self) -> String {
        self.model.clone()
    }

    fn sample(&self, req: &ChatRequest, _: u32) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt_text}],
            "temperature": req.temperature,
        });
        let v = self.config.post(&self.client, "chat/completions", &body)?;
        if let Some(err) = v.get("error") {
            return Err(GatewayError::Backend(err.to_string()));
        }
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Backend("response has no choices[0].message.content".into()))
    }
}

/// OpenAI-style `POST {base}/embeddings`.
pub struct HttpEmbeddings {
    config: HttpConfig,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpEmbeddings {
    pub fn new(config: HttpConfig, model: impl Into<String>) -> Result<Self, GatewayError> {
        Ok(HttpEmbeddings {
            client: config.client()?,
            config,
            model: model.into(),
        })
    }
}

impl EmbeddingBackend for HttpEmbeddings {
    fn id(&self) -> String {
        self.model.clone()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        let body = serde_json::json!({ "model": self.model, "input": text });
        let v = self.config.post(&self.client, "embeddings", &body)?;
        let arr = v
            .pointer("/data/0/embedding")
            .and_then(|e| e.as_array())
            .ok_or_else(|| GatewayError::Backend("response has no data[0].embedding".into()))?;
        arr.iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| GatewayError::Backend("non-numeric embedding component".into()))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Gateway

#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn run<T>(&self, mut f: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let mut attempt = 0;
        loop {
            match f() {
                Err(GatewayError::Transport(_)) if attempt < self.retries => {
                    std::thread::sleep(self.base_delay * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Cached, rate-limited access to a chat backend and an embedding backend.
pub struct Gateway {
    chat: Arc<dyn ChatBackend>,
    embedder: Arc<dyn EmbeddingBackend>,
    cache: Option<Arc<CacheStore>>,
    retry: RetryPolicy,
    limiter: Semaphore,
}

impl Gateway {
    pub fn new(chat: Arc<dyn ChatBackend>, embedder: Arc<dyn EmbeddingBackend>) -> Self {
        Gateway {
            chat,
            embedder,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: Semaphore::new(DEFAULT_MAX_IN_FLIGHT),
        }
    }

    /// Echo chat and hash embeddings, no cache.
    pub fn echo() -> Self {
        Gateway::new(Arc::new(MockChat::Echo), Arc::new(HashEmbedder::default()))
    }

    pub fn scripted(script: MockScript) -> Self {
        Gateway::new(
            Arc::new(MockChat::Scripted(script)),
            Arc::new(HashEmbedder::default()),
        )
    }

    pub fn with_cache(mut self, cache: Arc<CacheStore>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Semaphore::new(n);
        self
    }

    pub fn cache(&self) -> Option<&Arc<CacheStore>> {
        self.cache.as_ref()
    }

    pub fn chat_id(&self) -> String {
        self.chat.id()
    }

    fn chat_summary(&self, req: &ChatRequest, sample_index: u32) -> RequestSummary {
        RequestSummary {
            endpoint: EndpointKind::Chat,
            model: self.chat.id(),
            prompt: req.prompt_text.clone(),
            temperature: req.temperature,
            sample_index,
        }
    }

    /// Returns exactly `req.sample_count` responses. Cache hits are served
    /// locally; misses are sampled concurrently (bounded by the in-flight
    /// limit) and written to the cache before returning.
    pub fn complete(&self, req: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        self.complete_from(req, 0)
    }

    /// Like [`Gateway::complete`] with sample indices starting at `first_index`.
    pub fn complete_from(&self, req: &ChatRequest, first_index: u32) -> Result<Vec<String>, GatewayError> {
        let indices: Vec<u32> = (0..req.sample_count as u32).map(|i| first_index + i).collect();
        let mut out: Vec<Option<String>> = vec![None; indices.len()];
        let mut missing = Vec::new();
        for (slot, &idx) in indices.iter().enumerate() {
            match self.cached_text(&self.chat_summary(req, idx)) {
                Some(t) => out[slot] = Some(t),
                None => missing.push((slot, idx)),
            }
        }

        let fetched: Vec<(usize, Result<String, GatewayError>)> = if missing.len() <= 1 {
            missing
                .iter()
                .map(|&(slot, idx)| (slot, self.fetch_sample(req, idx)))
                .collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = missing
                    .iter()
                    .map(|&(slot, idx)| (slot, s.spawn(move || self.fetch_sample(req, idx))))
                    .collect();
                handles
                    .into_iter()
                    .map(|(slot, h)| (slot, h.join().expect("sampling thread panicked")))
                    .collect()
            })
        };
        for (slot, res) in fetched {
            out[slot] = Some(res?);
        }
        Ok(out.into_iter().map(|t| t.expect("every slot filled")).collect())
    }

    fn cached_text(&self, summary: &RequestSummary) -> Option<String> {
        let entry = self.cache.as_ref()?.get(&summary.key())?;
        match entry.response {
            CachedResponse::Text(t) => Some(t),
            CachedResponse::Vector(_) => None,
        }
    }

    fn fetch_sample(&self, req: &ChatRequest, idx: u32) -> Result<String, GatewayError> {
        let text = {
            let _permit = self.limiter.acquire();
            self.retry.run(|| self.chat.sample(req, idx))?
        };
        if let Some(cache) = &self.cache {
            cache.put(CacheEntry::new(
                self.chat_summary(req, idx),
                CachedResponse::Text(text.clone()),
            ))?;
        }
        Ok(text)
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let summary = RequestSummary {
            endpoint: EndpointKind::Embedding,
            model: self.embedder.id(),
            prompt: text.to_string(),
            temperature: 0.0,
            sample_index: 0,
        };
        if let Some(cache) = &self.cache {
            if let Some(CacheEntry {
                response: CachedResponse::Vector(v),
                ..
            }) = cache.get(&summary.key())
            {
                return Ok(EmbeddingVector(v));
            }
        }
        let v = {
            let _permit = self.limiter.acquire();
            self.retry.run(|| self.embedder.embed(text))?
        };
        if let Some(cache) = &self.cache {
            cache.put(CacheEntry::new(summary, CachedResponse::Vector(v.clone())))?;
        }
        Ok(EmbeddingVector(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn templates_render_golden() {
        assert_eq!(
            PromptKind::ShortenGp.render("P q."),
            "Delete spans of words or phrases from the following paragraph that don't contribute much to its meaning, but keep readability:\nP q.\nPlease do not add any new words or change words, only delete words."
        );
        assert_eq!(
            PromptKind::ShortenNgp.render("P q."),
            "Delete spans of words or phrases from the following paragraph that don't contribute much to its meaning. Don't worry about grammar:\nP q.\nPlease do not add any new words or change words, only delete words."
        );
        assert_eq!(
            PromptKind::GrammarGrade.render("P q."),
            "Score the following paragraph by how grammatical it is.\nP q.\nAnswer A for grammatically correct, B for moderately grammatical, and C for bad grammar. Only respond with one letter."
        );
    }

    #[test]
    fn paragraph_with_slot_text_is_inserted_verbatim() {
        let p = "literal {paragraph} inside";
        let s = PromptKind::ShortenGp.render(p);
        assert_eq!(s.matches(p).count(), 1);
    }

    #[test]
    fn grade_parsing() {
        assert_eq!(parse_grade("A"), Some(1.0));
        assert_eq!(parse_grade("B"), Some(0.5));
        assert_eq!(parse_grade("c"), Some(0.0));
        assert_eq!(parse_grade("Answer: B."), Some(0.5));
        assert_eq!(parse_grade("(a)"), Some(1.0));
        assert_eq!(parse_grade("Grammatical"), None);
        assert_eq!(parse_grade(""), None);
    }

    #[test]
    fn scripted_mock_echoes_its_script() {
        let mut script = MockScript::new();
        script.insert(PromptKind::ShortenGp, "para", 1, vec!["X".into(), "Y".into()]);
        let gw = Gateway::scripted(script);
        let req = ChatRequest::new(PromptKind::ShortenGp, "para")
            .with_samples(2)
            .with_tag(ScriptTag {
                paragraph_digest: text_digest("para"),
                round: 1,
                candidate: 0,
            });
        assert_eq!(gw.complete(&req).unwrap(), ["X", "Y"]);
    }

    #[test]
    fn echo_mock_returns_paragraph() {
        let gw = Gateway::echo();
        let req = ChatRequest::new(PromptKind::ShortenGp, "Some text here.");
        let out = gw.complete(&req).unwrap();
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|r| r == "Some text here."));
    }

    #[test]
    fn script_file_accepts_digest_or_text() {
        let json = format!(
            r#"{{"entries":[
                {{"kind":"shorten_gp","paragraph":"{}","round":1,"responses":["a"]}},
                {{"kind":"grammar_grade","paragraph_text":"t","round":2,"responses":["B"]}}
            ]}}"#,
            text_digest("t")
        );
        let s = MockScript::from_json(&json).unwrap();
        assert_eq!(s.get(PromptKind::ShortenGp, &text_digest("t"), 1).unwrap(), ["a"]);
        assert_eq!(s.get(PromptKind::GrammarGrade, &text_digest("t"), 2).unwrap(), ["B"]);
        assert!(MockScript::from_json(r#"{"entries":[{"kind":"shorten_gp","round":1,"responses":["a"]}]}"#).is_err());
    }

    #[test]
    fn hash_embeddings_are_deterministic_unit_vectors() {
        let gw = Gateway::echo();
        let a = gw.embed("a").unwrap();
        assert_eq!(a, gw.embed("a").unwrap());
        assert_ne!(a, gw.embed("b").unwrap());
        let norm: f64 = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    struct Flaky {
        calls: AtomicUsize,
        failures: usize,
        kind: fn(String) -> GatewayError,
    }

    impl ChatBackend for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn sample(&self, _: &ChatRequest, _: u32) -> Result<String, GatewayError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err((self.kind)(format!("failure {n}")))
            } else {
                Ok("ok".into())
            }
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            retries: 2,
            base_delay: Duration::from_millis(1),
        }
    }

    #[test]
    fn transport_errors_are_retried_twice() {
        let flaky = Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            failures: 2,
            kind: GatewayError::Transport,
        });
        let gw = Gateway::new(flaky.clone(), Arc::new(HashEmbedder::default())).with_retry(fast_retry());
        let req = ChatRequest::new(PromptKind::ShortenGp, "p").with_samples(1);
        assert_eq!(gw.complete(&req).unwrap(), ["ok"]);
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);

        let flaky = Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            failures: 3,
            kind: GatewayError::Transport,
        });
        let gw = Gateway::new(flaky.clone(), Arc::new(HashEmbedder::default())).with_retry(fast_retry());
        assert!(matches!(gw.complete(&req), Err(GatewayError::Transport(_))));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backend_errors_are_not_retried() {
        let flaky = Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            failures: 1,
            kind: GatewayError::Backend,
        });
        let gw = Gateway::new(flaky.clone(), Arc::new(HashEmbedder::default())).with_retry(fast_retry());
        let req = ChatRequest::new(PromptKind::ShortenGp, "p").with_samples(1);
        assert!(matches!(gw.complete(&req), Err(GatewayError::Backend(_))));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn responses_are_cached_and_replayed_offline() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(CacheStore::open(dir.path()).unwrap());
        let mut script = MockScript::new();
        script.insert(PromptKind::ShortenGp, "p q r", 1, vec!["p q".into(), "p r".into()]);
        let gw = Gateway::scripted(script.clone()).with_cache(cache.clone());
        let req = ChatRequest::new(PromptKind::ShortenGp, "p q r")
            .with_samples(4)
            .with_tag(ScriptTag {
                paragraph_digest: text_digest("p q r"),
                round: 1,
                candidate: 0,
            });
        let first = gw.complete(&req).unwrap();
        assert_eq!(first, ["p q", "p r", "p q", "p r"]);
        let e = gw.embed("p q").unwrap();
        assert_eq!(cache.len(), 5);

        let offline = Arc::new(OfflineBackend {
            id: MockChat::Scripted(script).id(),
            cache: dir.path().to_path_buf(),
        });
        let replay = Gateway::new(offline.clone(), offline.clone()).with_cache(cache.clone());
        assert_eq!(replay.complete(&req).unwrap(), first);
        // embeddings were keyed by the hash embedder's id, not the offline one
        assert!(matches!(replay.embed("p q"), Err(GatewayError::OfflineMiss { .. })));
        let replay = Gateway::new(offline, Arc::new(HashEmbedder::default())).with_cache(cache);
        assert_eq!(replay.embed("p q").unwrap(), e);
    }

    #[test]
    fn in_flight_limit_is_respected() {
        struct Counting {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl ChatBackend for Counting {
            fn id(&self) -> String {
                "counting".into()
            }
            fn sample(&self, _: &ChatRequest, i: u32) -> Result<String, GatewayError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(i.to_string())
            }
        }
        let backend = Arc::new(Counting {
            now: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let gw = Gateway::new(backend.clone(), Arc::new(HashEmbedder::default())).with_max_in_flight(2);
        let req = ChatRequest::new(PromptKind::ShortenGp, "p").with_samples(8);
        let out = gw.complete(&req).unwrap();
        assert_eq!(out, ["0", "1", "2", "3", "4", "5", "6", "7"]);
        assert!(backend.peak.load(Ordering::SeqCst) <= 2);
    }
}

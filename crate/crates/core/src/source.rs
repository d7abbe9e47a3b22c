//! Conversation sources: cue search and tweet lookup.
//!
//! [`FileCorpus`] serves a JSON Lines corpus from memory. [`HttpSource`]
//! talks to a generic search + lookup JSON API through a sliding-window rate
//! limiter with exponential backoff.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::cue::contains_phrase;
use crate::thread::Tweet;

pub const DEFAULT_PAGE_SIZE: usize = 100;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("source unavailable: {0}")]
    Unavailable(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed record {id}: {detail}")]
    MalformedRecord { id: String, detail: String },
    #[error("invalid cursor {0:?}")]
    BadCursor(String),
    #[error("operation not supported by this source: {0}")]
    Unsupported(&'static str),
    #[error("invalid source configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One page of results and the cursor for the next, if any.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub tweets: Vec<Tweet>,
    pub next_cursor: Option<String>,
}

/// A searchable, lookup-able store of tweets.
///
/// Implementations must only return tweets that pass [`Tweet::check`];
/// records that fail are dropped and counted in [`malformed_count`].
///
/// [`malformed_count`]: ConversationSource::malformed_count
pub trait ConversationSource: Send + Sync {
    /// Tweets matching `query` (case- and whitespace-insensitive phrase
    /// match), one page at a time.
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError>;

    /// `Ok(None)` when the tweet is deleted or otherwise unavailable.
    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError>;

    /// Every tweet, one page at a time. Used for negative sampling and the
    /// hashtag baseline.
    fn scan(&self, _cursor: Option<&str>) -> Result<Page, SourceError> {
        Err(SourceError::Unsupported("scan"))
    }

    /// Records dropped so far because they failed validation.
    fn malformed_count(&self) -> usize {
        0
    }
}

impl<S: ConversationSource + ?Sized> ConversationSource for &S {
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        (**self).search_cues(query, cursor)
    }
    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError> {
        (**self).lookup_tweet(id)
    }
    fn scan(&self, cursor: Option<&str>) -> Result<Page, SourceError> {
        (**self).scan(cursor)
    }
    fn malformed_count(&self) -> usize {
        (**self).malformed_count()
    }
}

impl<S: ConversationSource + ?Sized> ConversationSource for Box<S> {
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        (**self).search_cues(query, cursor)
    }
    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError> {
        (**self).lookup_tweet(id)
    }
    fn scan(&self, cursor: Option<&str>) -> Result<Page, SourceError> {
        (**self).scan(cursor)
    }
    fn malformed_count(&self) -> usize {
        (**self).malformed_count()
    }
}

// ---------------------------------------------------------------------------
// File corpus

/// An in-memory JSON Lines corpus. Immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct FileCorpus {
    tweets: Vec<Tweet>,
    by_id: HashMap<String, usize>,
    /// Records that carry a recognizable id but fail to parse or validate.
    malformed: HashMap<String, String>,
    malformed_lines: usize,
    page_size: usize,
    lang_filter: Option<String>,
}

impl FileCorpus {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| SourceError::Io { path: path.into(), source })?;
        Self::from_reader(BufReader::new(file)).map_err(|e| match e {
            SourceError::Io { source, .. } => SourceError::Io { path: path.into(), source },
            other => other,
        })
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, SourceError> {
        let mut corpus = FileCorpus { page_size: DEFAULT_PAGE_SIZE, ..Default::default() };
        for line in reader.lines() {
            let line = line.map_err(|source| SourceError::Io { path: PathBuf::new(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            corpus.ingest_line(&line);
        }
        Ok(corpus)
    }

    pub fn from_tweets(tweets: impl IntoIterator<Item = Tweet>) -> Self {
        let mut corpus = FileCorpus { page_size: DEFAULT_PAGE_SIZE, ..Default::default() };
        for t in tweets {
            corpus.ingest(t);
        }
        corpus
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    pub fn with_lang_filter(mut self, lang: Option<String>) -> Self {
        self.lang_filter = lang;
        self
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    fn ingest_line(&mut self, line: &str) {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) => {
                self.malformed_lines += 1;
                return;
            }
        };
        let id = value.get("id").and_then(Value::as_str).map(str::to_string);
        match serde_json::from_value::<Tweet>(value) {
            Ok(t) => self.ingest(t),
            Err(e) => self.reject(id, e.to_string()),
        }
    }

    fn ingest(&mut self, tweet: Tweet) {
        if let Err(detail) = tweet.check() {
            return self.reject(Some(tweet.id), detail);
        }
        if self.by_id.contains_key(&tweet.id) {
            self.malformed_lines += 1;
            return;
        }
        self.by_id.insert(tweet.id.clone(), self.tweets.len());
        self.tweets.push(tweet);
    }

    fn reject(&mut self, id: Option<String>, detail: String) {
        self.malformed_lines += 1;
        if let Some(id) = id.filter(|id| !id.is_empty()) {
            self.malformed.entry(id).or_insert(detail);
        }
    }

    fn lang_ok(&self, t: &Tweet) -> bool {
        self.lang_filter.as_deref().is_none_or(|l| t.lang == l)
    }

    fn paginate(&self, cursor: Option<&str>, keep: impl Fn(&Tweet) -> bool) -> Result<Page, SourceError> {
        let start = match cursor {
            None => 0,
            Some(c) => c.parse::<usize>().map_err(|_| SourceError::BadCursor(c.to_string()))?,
        };
        if start > self.tweets.len() {
            return Err(SourceError::BadCursor(start.to_string()));
        }
        let mut page = Page::default();
        let mut matching = self.tweets.iter().enumerate().skip(start).filter(|(_, t)| keep(t));
        for (_, t) in matching.by_ref().take(self.page_size) {
            page.tweets.push(t.clone());
        }
        // Look ahead so the last page never carries a dangling cursor.
        page.next_cursor = matching.next().map(|(i, _)| i.to_string());
        Ok(page)
    }
}

impl ConversationSource for FileCorpus {
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        self.paginate(cursor, |t| self.lang_ok(t) && contains_phrase(&t.text, query))
    }

    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError> {
        if let Some(&i) = self.by_id.get(id) {
            return Ok(Some(self.tweets[i].clone()));
        }
        match self.malformed.get(id) {
            Some(detail) => Err(SourceError::MalformedRecord { id: id.to_string(), detail: detail.clone() }),
            None => Ok(None),
        }
    }

    fn scan(&self, cursor: Option<&str>) -> Result<Page, SourceError> {
        self.paginate(cursor, |t| self.lang_ok(t))
    }

    fn malformed_count(&self) -> usize {
        self.malformed_lines
    }
}

// ---------------------------------------------------------------------------
// Rate limiting

/// Sliding-window limiter: at most `limit` dispatches in any `window`.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    sent: VecDeque<Instant>,
}

impl RateLimiter {
    pub fn new(limit: usize, window: Duration) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        RateLimiter { limit, window, sent: VecDeque::with_capacity(limit) }
    }

    /// Claims a slot at `now`, or returns how long to wait before retrying.
    pub fn try_acquire(&mut self, now: Instant) -> Result<(), Duration> {
        while let Some(&oldest) = self.sent.front() {
            if now.duration_since(oldest) >= self.window {
                self.sent.pop_front();
            } else {
                break;
            }
        }
        if self.sent.len() < self.limit {
            self.sent.push_back(now);
            Ok(())
        } else {
            let oldest = self.sent[0];
            Err(self.window - now.duration_since(oldest))
        }
    }
}

// ---------------------------------------------------------------------------
// HTTP source

fn default_page_size() -> usize {
    DEFAULT_PAGE_SIZE
}
fn default_window() -> f64 {
    1.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthConfig {
    /// Header name, e.g. `Authorization`.
    pub header: String,
    /// Environment variable holding the secret.
    pub env: String,
    #[serde(default)]
    pub prefix: String,
}

/// JSON pointers locating each field in the API's responses.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    /// Array of tweet objects in a search/scan response.
    pub items: String,
    /// Next-page token in a search/scan response.
    pub next_cursor: String,
    /// Tweet object in a lookup response (`""` is the whole body).
    pub item: String,
    pub id: String,
    pub parent_id: String,
    pub author_id: String,
    pub text: String,
    pub created_at: String,
    pub lang: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            items: "/data".into(),
            next_cursor: "/next_cursor".into(),
            item: String::new(),
            id: "/id".into(),
            parent_id: "/parent_id".into(),
            author_id: "/author_id".into(),
            text: "/text".into(),
            created_at: "/created_at".into(),
            lang: "/lang".into(),
        }
    }
}

/// Endpoint templates accept `{query}`, `{cursor}`, `{page_size}`, `{lang}`
/// and (lookup only) `{id}`; substituted values are percent-encoded.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub search_url: String,
    pub lookup_url: String,
    #[serde(default)]
    pub scan_url: Option<String>,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    /// Requests allowed per `rate_window_secs`.
    pub rate_limit: u32,
    #[serde(default = "default_window")]
    pub rate_window_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    #[serde(default)]
    pub lang_filter: Option<String>,
    #[serde(default)]
    pub auth: Option<AuthConfig>,
    #[serde(default)]
    pub fields: FieldMap,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub path: PathBuf,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    #[serde(default)]
    pub lang_filter: Option<String>,
}

/// Source configuration file (TOML), tagged by `kind = "file" | "http"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    File(FileConfig),
    Http(Box<HttpConfig>),
}

impl SourceConfig {
    pub fn parse(text: &str) -> Result<Self, SourceError> {
        toml::from_str(text).map_err(|e| SourceError::Config(e.to_string()))
    }

    /// Loads a TOML config. A path ending in `.jsonl` is taken as a corpus
    /// file with default settings.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "jsonl") {
            return Ok(SourceConfig::File(FileConfig {
                path: path.to_path_buf(),
                page_size: DEFAULT_PAGE_SIZE,
                lang_filter: None,
            }));
        }
        let text = std::fs::read_to_string(path).map_err(|source| SourceError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let SourceConfig::File(f) = &mut cfg {
            if f.path.is_relative() {
                if let Some(dir) = path.parent() {
                    f.path = dir.join(&f.path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            SourceConfig::File(f) => {
                if !f.path.exists() {
                    return Err(SourceError::Config(format!("corpus {} does not exist", f.path.display())));
                }
            }
            SourceConfig::Http(h) => {
                if h.rate_limit == 0 {
                    return Err(SourceError::Config("rate_limit must be > 0".into()));
                }
                if h.rate_window_secs.is_nan() || h.rate_window_secs <= 0.0 {
                    return Err(SourceError::Config("rate_window_secs must be > 0".into()));
                }
                if !h.lookup_url.contains("{id}") {
                    return Err(SourceError::Config("lookup_url must contain {id}".into()));
                }
            }
        }
        Ok(())
    }

    pub fn open(&self) -> Result<Box<dyn ConversationSource>, SourceError> {
        self.validate()?;
        Ok(match self {
            SourceConfig::File(f) => {
                Box::new(FileCorpus::open(&f.path)?.with_page_size(f.page_size).with_lang_filter(f.lang_filter.clone()))
            }
            SourceConfig::Http(h) => Box::new(HttpSource::new((**h).clone())?),
        })
    }
}

pub struct HttpSource {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    auth: Option<(String, String)>,
    limiter: Mutex<RateLimiter>,
    malformed: AtomicUsize,
    requests: AtomicUsize,
}

enum Fetched {
    Json(Value),
    NotFound,
}

impl HttpSource {
    pub fn new(config: HttpConfig) -> Result<Self, SourceError> {
        if config.rate_limit == 0 {
            return Err(SourceError::Config("rate_limit must be > 0".into()));
        }
        let auth = match &config.auth {
            Some(a) => {
                let secret = std::env::var(&a.env)
                    .map_err(|_| SourceError::Config(format!("environment variable {} is not set", a.env)))?;
                Some((a.header.clone(), format!("{}{}", a.prefix, secret)))
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SourceError::Config(e.to_string()))?;
        let window = Duration::from_secs_f64(config.rate_window_secs);
        Ok(HttpSource {
            limiter: Mutex::new(RateLimiter::new(config.rate_limit as usize, window)),
            config,
            client,
            auth,
            malformed: AtomicUsize::new(0),
            requests: AtomicUsize::new(0),
        })
    }

    /// Requests dispatched so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn render(&self, template: &str, vars: &[(&str, &str)]) -> String {
        let mut out = template.to_string();
        for (key, value) in vars {
            let encoded: String = url::form_urlencoded::byte_serialize(value.as_bytes()).collect();
            out = out.replace(&format!("{{{key}}}"), &encoded);
        }
        out
    }

    /// Sends one GET through the limiter. Dispatch is serialized: the limiter
    /// lock is held until the response headers arrive.
    fn dispatch(&self, url: &str) -> Result<reqwest::blocking::Response, reqwest::Error> {
        let mut limiter = self.limiter.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            match limiter.try_acquire(Instant::now()) {
                Ok(()) => break,
                Err(wait) => std::thread::sleep(wait),
            }
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self.client.get(url);
        if let Some((name, value)) = &self.auth {
            req = req.header(name.as_str(), value.as_str());
        }
        req.send()
    }

    fn get_json(&self, url: &str) -> Result<Fetched, SourceError> {
        let mut last = SourceError::Unavailable("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let factor = 1u64 << (attempt - 1).min(16);
                std::thread::sleep(Duration::from_millis(self.config.backoff_base_ms.saturating_mul(factor)));
            }
            match self.dispatch(url) {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let body = resp
                            .text()
                            .map_err(|e| SourceError::Unavailable(format!("reading body from {url}: {e}")))?;
                        return serde_json::from_str(&body)
                            .map(Fetched::Json)
                            .map_err(|e| SourceError::Unavailable(format!("bad response body from {url}: {e}")));
                    }
                    if status == reqwest::StatusCode::NOT_FOUND {
                        return Ok(Fetched::NotFound);
                    }
                    if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
                        last = SourceError::RateLimited { attempts: attempt + 1 };
                    } else if status.is_server_error() {
                        last = SourceError::Unavailable(format!("{url}: HTTP {status}"));
                    } else {
                        return Err(SourceError::Unavailable(format!("{url}: HTTP {status}")));
                    }
                }
                Err(e) => last = SourceError::Unavailable(format!("{url}: {e}")),
            }
        }
        Err(last)
    }

    fn parse_tweet(&self, item: &Value) -> Result<Tweet, (String, String)> {
        let f = &self.config.fields;
        let text_at = |ptr: &str| -> Option<String> {
            match item.pointer(ptr)? {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            }
        };
        let id = text_at(&f.id).unwrap_or_default();
        let fail = |detail: &str| (id.clone(), detail.to_string());
        let created_raw = text_at(&f.created_at).ok_or_else(|| fail("missing created_at"))?;
        let created_at = DateTime::parse_from_rfc3339(&created_raw)
            .map_err(|e| fail(&format!("created_at: {e}")))?
            .with_timezone(&Utc);
        let tweet = Tweet {
            id: id.clone(),
            parent_id: text_at(&f.parent_id),
            author_id: text_at(&f.author_id).ok_or_else(|| fail("missing author_id"))?,
            text: text_at(&f.text).ok_or_else(|| fail("missing text"))?,
            created_at,
            lang: text_at(&f.lang).unwrap_or_default(),
        };
        tweet.check().map_err(|d| fail(&d))?;
        Ok(tweet)
    }

    fn page_from(&self, body: &Value) -> Result<Page, SourceError> {
        let f = &self.config.fields;
        let items = body.pointer(&f.items).map(|v| v.as_array().cloned().unwrap_or_default()).unwrap_or_default();
        let mut page = Page::default();
        for item in &items {
            match self.parse_tweet(item) {
                Ok(t) if self.config.lang_filter.as_deref().is_none_or(|l| t.lang == l) => page.tweets.push(t),
                Ok(_) => {}
                Err(_) => {
                    self.malformed.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        page.next_cursor = match body.pointer(&f.next_cursor) {
            Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            _ => None,
        };
        Ok(page)
    }

    fn paged(&self, template: &str, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        let page_size = self.config.page_size.to_string();
        let url = self.render(
            template,
            &[
                ("query", query),
                ("cursor", cursor.unwrap_or("")),
                ("page_size", &page_size),
                ("lang", self.config.lang_filter.as_deref().unwrap_or("")),
            ],
        );
        match self.get_json(&url)? {
            Fetched::Json(body) => self.page_from(&body),
            Fetched::NotFound => Ok(Page::default()),
        }
    }
}

impl ConversationSource for HttpSource {
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        let mut page = self.paged(&self.config.search_url, query, cursor)?;
        // Backends may match loosely; keep only true phrase matches.
        page.tweets.retain(|t| contains_phrase(&t.text, query));
        Ok(page)
    }

    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError> {
        let url = self.render(&self.config.lookup_url, &[("id", id)]);
        let body = match self.get_json(&url)? {
            Fetched::Json(body) => body,
            Fetched::NotFound => return Ok(None),
        };
        let item = match body.pointer(&self.config.fields.item) {
            Some(Value::Null) | None => return Ok(None),
            Some(item) => item,
        };
        self.parse_tweet(item).map(Some).map_err(|(got, detail)| {
            self.malformed.fetch_add(1, Ordering::Relaxed);
            SourceError::MalformedRecord { id: if got.is_empty() { id.to_string() } else { got }, detail }
        })
    }

    fn scan(&self, cursor: Option<&str>) -> Result<Page, SourceError> {
        let template = self.config.scan_url.as_deref().ok_or(SourceError::Unsupported("scan (no scan_url)"))?;
        self.paged(template, "", cursor)
    }

    fn malformed_count(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
    }
}

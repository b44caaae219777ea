#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use bonsai_core::catalog::Catalog;
use bonsai_core::lm::{LmClient, MockRules};
use bonsai_core::sourcer::{CorpusLine, FixtureAdapter, PlatformAdapter};
use bonsai_core::Post;
use bonsai_service::api::router;
use bonsai_service::clock::{Clock, FrozenClock};
use bonsai_service::config::{ServiceConfig, TestCredential};
use bonsai_service::store::{FeedStore, FileStore};
use bonsai_service::{AppState, Components};
use chrono::{DateTime, Duration as ChronoDuration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const HANDLE: &str = "alice.test";
pub const PASSWORD: &str = "alice-app-password";
pub const OTHER_HANDLE: &str = "bob.test";
pub const OTHER_PASSWORD: &str = "bob-app-password";
pub const PUBLISHER: &str = "did:web:feeds.bonsai.test";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap()
}

pub fn test_config(data_dir: &std::path::Path) -> ServiceConfig {
    let mut cfg = ServiceConfig::default();
    cfg.storage.data_dir = data_dir.to_path_buf();
    cfg.adapter.corpus = Some(fixture("corpus_20.jsonl"));
    cfg.adapter.credentials = vec![
        TestCredential { handle: HANDLE.into(), app_password: PASSWORD.into() },
        TestCredential { handle: OTHER_HANDLE.into(), app_password: OTHER_PASSWORD.into() },
    ];
    cfg.feeds.publisher_did = PUBLISHER.into();
    cfg.scheduler.enabled = false;
    cfg.clock.frozen_now = Some(now());
    cfg
}

pub fn fixture_adapter(corpus: FixtureAdapter) -> FixtureAdapter {
    corpus.with_credentials(HANDLE, PASSWORD).with_credentials(OTHER_HANDLE, OTHER_PASSWORD)
}

pub struct Harness {
    pub dir: tempfile::TempDir,
    pub state: AppState,
    pub app: Router,
}

pub struct Builder {
    pub config: ServiceConfig,
    pub adapter: Option<Arc<dyn PlatformAdapter>>,
    pub rules: MockRules,
    pub lm: Option<LmClient>,
    pub store: Option<Arc<dyn FeedStore>>,
    pub clock: Arc<dyn Clock>,
    pub dir: Option<tempfile::TempDir>,
}

impl Builder {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        Self {
            config: test_config(dir.path()),
            adapter: None,
            rules: MockRules::load(fixture("mock_rules.json")).unwrap(),
            lm: None,
            store: None,
            clock: Arc::new(FrozenClock(now())),
            dir: Some(dir),
        }
    }

    pub fn corpus(mut self, adapter: FixtureAdapter) -> Self {
        self.adapter = Some(Arc::new(fixture_adapter(adapter)));
        self
    }

    pub fn rules(mut self, rules: MockRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn lm(mut self, lm: LmClient) -> Self {
        self.lm = Some(lm);
        self
    }

    pub fn store(mut self, store: Arc<dyn FeedStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn data_dir(&self) -> PathBuf {
        self.config.storage.data_dir.clone()
    }

    pub fn build(self) -> Harness {
        let adapter = self
            .adapter
            .unwrap_or_else(|| Arc::new(fixture_adapter(FixtureAdapter::load(fixture("corpus_20.jsonl")).unwrap())));
        let store = self.store.unwrap_or_else(|| Arc::new(FileStore::open(&self.config.storage.data_dir).unwrap()));
        let (catalog, _) = Catalog::ingest(fixture("catalog.jsonl")).unwrap();
        let state = AppState::assemble(
            self.config,
            Components {
                adapter,
                lm: self.lm.unwrap_or_else(|| LmClient::mock(self.rules)),
                catalog,
                store,
                clock: self.clock,
            },
        )
        .unwrap();
        let app = router(state.clone());
        Harness { dir: self.dir.unwrap(), state, app }
    }
}

impl Harness {
    pub fn new() -> Self {
        Builder::new().build()
    }

    pub async fn send(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        send(&self.app, method, uri, token, body).await
    }

    pub async fn login(&self) -> String {
        self.login_as(HANDLE, PASSWORD).await
    }

    pub async fn login_as(&self, handle: &str, password: &str) -> String {
        let (status, body) = self
            .send(Method::POST, "/api/session", None, Some(json!({"handle": handle, "app_password": password})))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_string()
    }

    /// Creates the pets fixture feed under `feed_id`.
    pub async fn create_pets(&self, token: &str, feed_id: &str) -> Value {
        let mut cfg: Value =
            serde_json::from_str(&std::fs::read_to_string(fixture("feed_pets.json")).unwrap()).unwrap();
        cfg["feed_id"] = json!(feed_id);
        let (status, body) = self.send(Method::POST, "/api/feeds", Some(token), Some(cfg)).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body
    }

    pub async fn create_feed(&self, token: &str, feed_id: &str, sources: Value) -> Value {
        let cfg = json!({
            "feed_id": feed_id,
            "description": "test feed",
            "sources": sources,
            "include_prompts": [{"prompt_id": "i1", "text": "posts about cats", "polarity": "include", "strength": "preferred"}],
            "limit_prompts": [],
            "ranking": "balanced",
        });
        let (status, body) = self.send(Method::POST, "/api/feeds", Some(token), Some(cfg)).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body
    }

    pub async fn generate(&self, token: &str, feed_id: &str) -> (StatusCode, Value) {
        self.send(Method::POST, &format!("/api/feeds/{feed_id}/generate"), Some(token), None).await
    }

    pub fn feed_uri(&self, feed_id: &str) -> String {
        format!("at://{PUBLISHER}/app.bsky.feed.generator/{feed_id}")
    }

    pub async fn skeleton(&self, feed_id: &str, limit: Option<usize>, cursor: Option<&str>) -> (StatusCode, Value) {
        let mut uri = format!("/xrpc/app.bsky.feed.getFeedSkeleton?feed={}", self.feed_uri(feed_id));
        if let Some(l) = limit {
            uri.push_str(&format!("&limit={l}"));
        }
        if let Some(c) = cursor {
            uri.push_str(&format!("&cursor={c}"));
        }
        self.send(Method::GET, &uri, None, None).await
    }

    /// Follows cursors to the end; returns every uri served in order.
    pub async fn walk(&self, feed_id: &str, limit: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let (status, body) = self.skeleton(feed_id, Some(limit), cursor.as_deref()).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            let page = body["feed"].as_array().unwrap();
            assert!(page.len() <= limit);
            out.extend(page.iter().map(|i| i["post"].as_str().unwrap().to_string()));
            match body.get("cursor").and_then(Value::as_str) {
                Some(c) => cursor = Some(c.to_string()),
                None => break,
            }
        }
        out
    }
}

pub async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

pub fn post(uri: &str, minutes_ago: i64, likes: u64, text: &str) -> Post {
    Post {
        uri: uri.into(),
        author: "did:plc:poster".into(),
        text: text.into(),
        media: vec![],
        created_at: now() - ChronoDuration::minutes(minutes_ago),
        likes,
        reposts: 0,
        replies: 0,
        fetched_via: None,
    }
}

pub fn corpus(source: &str, posts: Vec<Post>) -> FixtureAdapter {
    FixtureAdapter::from_lines(posts.into_iter().map(|p| CorpusLine { source_identifier: source.into(), post: p }))
}

pub fn slow(adapter: FixtureAdapter, ms: u64) -> FixtureAdapter {
    adapter.with_latency(Duration::from_millis(ms))
}

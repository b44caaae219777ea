//! Live adapter speaking XRPC to an AT-Protocol service.
//!
//! Not exercised in CI; the response parsing is unit-tested on canned
//! payloads.

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Mutex;

use super::{AdapterError, FetchWindow, PlatformAdapter, SourceBatch};
use crate::model::{MediaRef, Post, Source, SourceKind};

const PAGE_LIMIT: usize = 100;
const MAX_PAGES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtprotoConfig {
    /// PDS or AppView base URL, e.g. `https://bsky.social`.
    pub service_url: String,
    /// Environment variable holding the service account handle.
    #[serde(default = "default_handle_env")]
    pub handle_env: String,
    /// Environment variable holding the service account app password.
    #[serde(default = "default_password_env")]
    pub app_password_env: String,
}

fn default_handle_env() -> String {
    "BONSAI_ATPROTO_HANDLE".into()
}

fn default_password_env() -> String {
    "BONSAI_ATPROTO_APP_PASSWORD".into()
}

pub struct AtprotoAdapter {
    http: reqwest::Client,
    service_url: String,
    login: Option<(String, String)>,
    access_jwt: Mutex<Option<String>>,
}

impl AtprotoAdapter {
    pub fn new(config: &AtprotoConfig) -> Self {
        let login = match (std::env::var(&config.handle_env), std::env::var(&config.app_password_env)) {
            (Ok(h), Ok(p)) if !h.is_empty() && !p.is_empty() => Some((h, p)),
            _ => None,
        };
        Self {
            http: reqwest::Client::new(),
            service_url: config.service_url.trim_end_matches('/').to_string(),
            login,
            access_jwt: Mutex::new(None),
        }
    }

    fn xrpc(&self, method: &str) -> String {
        format!("{}/xrpc/{method}", self.service_url)
    }

    async fn create_session(&self, identifier: &str, password: &str) -> Result<Value, AdapterError> {
        let response = self
            .http
            .post(self.xrpc("com.atproto.server.createSession"))
            .json(&serde_json::json!({"identifier": identifier, "password": password}))
            .send()
            .await
            .map_err(|e| AdapterError::Unavailable(e.to_string()))?;
        if response.status().as_u16() == 401 || response.status().as_u16() == 400 {
            return Err(AdapterError::Auth(format!("createSession returned {}", response.status())));
        }
        if !response.status().is_success() {
            return Err(AdapterError::Unavailable(format!("createSession returned {}", response.status())));
        }
        response.json().await.map_err(|e| AdapterError::Unavailable(e.to_string()))
    }

    async fn token(&self) -> Result<Option<String>, AdapterError> {
        let Some((handle, password)) = &self.login else {
            return Ok(None);
        };
        let mut guard = self.access_jwt.lock().await;
        if guard.is_none() {
            let session = self.create_session(handle, password).await?;
            *guard = session["accessJwt"].as_str().map(str::to_string);
        }
        Ok(guard.clone())
    }

    async fn get(&self, method: &str, params: &[(&str, String)]) -> Result<Value, AdapterError> {
        let mut req = self.http.get(self.xrpc(method)).query(params);
        if let Some(token) = self.token().await? {
            req = req.bearer_auth(token);
        }
        let response = req.send().await.map_err(|e| AdapterError::Unavailable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 400 || status.as_u16() == 404 {
            return Err(AdapterError::NotFound(format!("{method} returned {status}")));
        }
        if !status.is_success() {
            return Err(AdapterError::Unavailable(format!("{method} returned {status}")));
        }
        response.json().await.map_err(|e| AdapterError::Unavailable(e.to_string()))
    }

    /// Walks cursor pages until the cap is reached or posts fall before the
    /// window.
    async fn paged(
        &self,
        method: &str,
        base: Vec<(&str, String)>,
        list_field: &str,
        window: &FetchWindow,
    ) -> Result<SourceBatch, AdapterError> {
        let mut batch = SourceBatch::default();
        let mut cursor: Option<String> = None;
        for _ in 0..MAX_PAGES {
            let mut params = base.clone();
            params.push(("limit", PAGE_LIMIT.to_string()));
            if let Some(c) = &cursor {
                params.push(("cursor", c.clone()));
            }
            let page = self.get(method, &params).await?;
            let items = page[list_field].as_array().cloned().unwrap_or_default();
            let mut reached_start = items.is_empty();
            for item in &items {
                // Feed items wrap the post view; search results are bare.
                let view = item.get("post").unwrap_or(item);
                if let Some((post, defaulted)) = parse_post_view(view) {
                    if post.created_at < window.since {
                        reached_start = true;
                    }
                    batch.defaulted_counters += usize::from(defaulted);
                    batch.posts.push(post);
                }
            }
            cursor = page["cursor"].as_str().map(str::to_string);
            if reached_start || cursor.is_none() || batch.posts.len() >= window.per_source_cap * 2 {
                break;
            }
        }
        Ok(batch)
    }
}

/// Converts an `app.bsky.feed.defs#postView`. Returns the post and whether
/// any engagement counter was missing.
pub(crate) fn parse_post_view(view: &Value) -> Option<(Post, bool)> {
    let uri = view["uri"].as_str()?.to_string();
    let author = view["author"]["did"].as_str().or(view["author"]["handle"].as_str())?.to_string();
    let record = &view["record"];
    let created_at: DateTime<Utc> = record["createdAt"]
        .as_str()
        .or(view["indexedAt"].as_str())
        .and_then(|t| DateTime::parse_from_rfc3339(t).ok())?
        .with_timezone(&Utc);
    let counter = |k: &str| view.get(k).and_then(Value::as_u64);
    let (likes, reposts, replies) = (counter("likeCount"), counter("repostCount"), counter("replyCount"));
    let defaulted = likes.is_none() || reposts.is_none() || replies.is_none();
    Some((
        Post {
            uri,
            author,
            text: record["text"].as_str().unwrap_or_default().to_string(),
            media: parse_embed(&view["embed"]),
            created_at,
            likes: likes.unwrap_or(0),
            reposts: reposts.unwrap_or(0),
            replies: replies.unwrap_or(0),
            fetched_via: None,
        },
        defaulted,
    ))
}

fn parse_embed(embed: &Value) -> Vec<MediaRef> {
    let kind = embed["$type"].as_str().unwrap_or_default();
    match kind {
        "app.bsky.embed.images#view" => embed["images"]
            .as_array()
            .map(|imgs| {
                imgs.iter()
                    .filter_map(|img| {
                        Some(MediaRef {
                            media_type: "image".into(),
                            url: img["fullsize"].as_str().or(img["thumb"].as_str())?.to_string(),
                            alt: img["alt"].as_str().filter(|a| !a.is_empty()).map(str::to_string),
                        })
                    })
                    .collect()
            })
            .unwrap_or_default(),
        "app.bsky.embed.video#view" => embed["playlist"]
            .as_str()
            .map(|url| {
                vec![MediaRef {
                    media_type: "video".into(),
                    url: url.to_string(),
                    alt: embed["alt"].as_str().map(str::to_string),
                }]
            })
            .unwrap_or_default(),
        "app.bsky.embed.external#view" => embed["external"]["uri"]
            .as_str()
            .map(|url| {
                vec![MediaRef {
                    media_type: "external".into(),
                    url: url.to_string(),
                    alt: embed["external"]["title"].as_str().map(str::to_string),
                }]
            })
            .unwrap_or_default(),
        "app.bsky.embed.recordWithMedia#view" => parse_embed(&embed["media"]),
        _ => Vec::new(),
    }
}

#[async_trait]
impl PlatformAdapter for AtprotoAdapter {
    fn name(&self) -> &str {
        "atproto"
    }

    fn supports(&self, _kind: SourceKind) -> bool {
        true
    }

    async fn fetch(&self, source: &Source, window: &FetchWindow) -> Result<SourceBatch, AdapterError> {
        let id = source.identifier.clone();
        match source.kind {
            SourceKind::Feed => self.paged("app.bsky.feed.getFeed", vec![("feed", id)], "feed", window).await,
            SourceKind::List => self.paged("app.bsky.feed.getListFeed", vec![("list", id)], "feed", window).await,
            SourceKind::Account => self.paged("app.bsky.feed.getAuthorFeed", vec![("actor", id)], "feed", window).await,
            SourceKind::StarterPack => {
                let pack = self.get("app.bsky.graph.getStarterPack", &[("starterPack", id.clone())]).await?;
                let list = pack["starterPack"]["list"]["uri"]
                    .as_str()
                    .ok_or_else(|| AdapterError::NotFound(format!("starter pack {id} has no list")))?;
                self.paged("app.bsky.feed.getListFeed", vec![("list", list.to_string())], "feed", window).await
            }
            SourceKind::SearchQuery | SourceKind::Hashtag => {
                let q = if source.kind == SourceKind::Hashtag { format!("#{id}") } else { id };
                let params = vec![
                    ("q", q),
                    ("sort", "latest".to_string()),
                    ("since", window.since.to_rfc3339()),
                    ("until", window.until.to_rfc3339()),
                ];
                self.paged("app.bsky.feed.searchPosts", params, "posts", window).await
            }
        }
    }

    async fn verify_credentials(&self, handle: &str, app_password: &str) -> Result<String, AdapterError> {
        let session = self.create_session(handle, app_password).await?;
        session["did"]
            .as_str()
            .or(session["handle"].as_str())
            .map(str::to_string)
            .ok_or_else(|| AdapterError::Auth("session response has no did".into()))
    }
}

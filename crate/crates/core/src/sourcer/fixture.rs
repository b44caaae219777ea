//! Offline adapter over a JSON-lines post corpus keyed by source identifier.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AdapterError, FetchWindow, PlatformAdapter, SourceBatch};
use crate::model::{Post, Source, SourceKind};

/// One corpus line: `{"source_identifier": ..., "post": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub source_identifier: String,
    pub post: Post,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read corpus {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corpus line {line}: {message}")]
    Line { line: usize, message: String },
}

#[derive(Debug, Clone)]
struct Entry {
    post: Post,
    counters_missing: bool,
}

#[derive(Debug, Default)]
pub struct FixtureAdapter {
    by_source: HashMap<String, Vec<Entry>>,
    credentials: HashMap<String, String>,
    failing: HashSet<String>,
    unsupported: HashSet<SourceKind>,
    latency: Option<Duration>,
}

impl FixtureAdapter {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
        Self::from_jsonl(&text)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, FixtureError> {
        let mut adapter = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| FixtureError::Line { line: i + 1, message };
            let raw: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let counters_missing =
                ["likes", "reposts", "replies"].iter().any(|k| raw.get("post").and_then(|p| p.get(k)).is_none());
            let parsed: CorpusLine = serde_json::from_value(raw).map_err(|e| err(e.to_string()))?;
            adapter.insert(parsed.source_identifier, parsed.post, counters_missing);
        }
        Ok(adapter)
    }

    pub fn from_lines(lines: impl IntoIterator<Item = CorpusLine>) -> Self {
        let mut adapter = Self::default();
        for line in lines {
            adapter.insert(line.source_identifier, line.post, false);
        }
        adapter
    }

    fn insert(&mut self, identifier: String, post: Post, counters_missing: bool) {
        let key = identifier.trim().trim_start_matches('#').to_string();
        self.by_source.entry(key).or_default().push(Entry { post, counters_missing });
    }

    /// Accepts this handle / app-password pair at login.
    pub fn with_credentials(mut self, handle: impl Into<String>, app_password: impl Into<String>) -> Self {
        self.credentials.insert(handle.into(), app_password.into());
        self
    }

    /// Fetches of this identifier fail as unavailable.
    pub fn with_failing_source(mut self, identifier: impl Into<String>) -> Self {
        self.failing.insert(identifier.into());
        self
    }

    pub fn without_kind(mut self, kind: SourceKind) -> Self {
        self.unsupported.insert(kind);
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn source_identifiers(&self) -> impl Iterator<Item = &str> {
        self.by_source.keys().map(String::as_str)
    }

    pub fn post_count(&self) -> usize {
        self.by_source.values().map(Vec::len).sum()
    }

    /// Creation time of the newest post in the corpus.
    pub fn newest_post_at(&self) -> Option<DateTime<Utc>> {
        self.by_source.values().flatten().map(|e| e.post.created_at).max()
    }
}

#[async_trait]
impl PlatformAdapter for FixtureAdapter {
    fn name(&self) -> &str {
        "fixture"
    }

    fn supports(&self, kind: SourceKind) -> bool {
        !self.unsupported.contains(&kind)
    }

    /// Returns everything stored for the source; window filtering is left to
    /// the sourcer. Unknown feeds, lists, packs and accounts are errors;
    /// unknown searches and hashtags simply have no results.
    async fn fetch(&self, source: &Source, _window: &FetchWindow) -> Result<SourceBatch, AdapterError> {
        if let Some(latency) = self.latency {
            tokio::time::sleep(latency).await;
        }
        if self.failing.contains(&source.identifier) {
            return Err(AdapterError::Unavailable(format!("fixture source {} is marked failing", source.identifier)));
        }
        let key = source.identifier.trim().trim_start_matches('#');
        match self.by_source.get(key) {
            Some(entries) => Ok(SourceBatch {
                posts: entries.iter().map(|e| e.post.clone()).collect(),
                defaulted_counters: entries.iter().filter(|e| e.counters_missing).count(),
            }),
            None if matches!(source.kind, SourceKind::SearchQuery | SourceKind::Hashtag) => Ok(SourceBatch::default()),
            None => Err(AdapterError::NotFound(source.identifier.clone())),
        }
    }

    async fn verify_credentials(&self, handle: &str, app_password: &str) -> Result<String, AdapterError> {
        match self.credentials.get(handle) {
            Some(expected) if expected == app_password => Ok(handle.to_string()),
            _ => Err(AdapterError::Auth("invalid handle or app password".into())),
        }
    }
}

//! Candidate retrieval from a config's sources.

mod atproto;
mod fixture;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::model::{FeedConfig, Post, Source, SourceKind};

pub use atproto::{AtprotoAdapter, AtprotoConfig};
pub use fixture::{CorpusLine, FixtureAdapter, FixtureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchWindow {
    pub since: DateTime<Utc>,
    pub until: DateTime<Utc>,
    pub per_source_cap: usize,
    /// Whether a post created exactly at `since` is in the window.
    pub since_inclusive: bool,
}

impl FetchWindow {
    /// `[now - hours, now]`.
    pub fn initial(now: DateTime<Utc>, hours: i64, per_source_cap: usize) -> Result<Self, SourcingError> {
        Self::checked(now - chrono::Duration::hours(hours), now, per_source_cap, true)
    }

    /// `(last_update, now]`.
    pub fn incremental(
        last_update: DateTime<Utc>,
        now: DateTime<Utc>,
        per_source_cap: usize,
    ) -> Result<Self, SourcingError> {
        Self::checked(last_update, now, per_source_cap, false)
    }

    fn checked(
        since: DateTime<Utc>,
        until: DateTime<Utc>,
        per_source_cap: usize,
        since_inclusive: bool,
    ) -> Result<Self, SourcingError> {
        if since >= until || per_source_cap == 0 {
            return Err(SourcingError::InvalidWindow { since, until, per_source_cap });
        }
        Ok(Self { since, until, per_source_cap, since_inclusive })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        let above = if self.since_inclusive { t >= self.since } else { t > self.since };
        above && t <= self.until
    }
}

/// Posts returned by an adapter for one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceBatch {
    pub posts: Vec<Post>,
    /// Posts whose engagement counters were missing and set to zero.
    pub defaulted_counters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("source kind {0} is not supported by this adapter")]
    Unsupported(SourceKind),
    #[error("source not found: {0}")]
    NotFound(String),
    #[error("platform unavailable: {0}")]
    Unavailable(String),
    #[error("authentication failed: {0}")]
    Auth(String),
}

#[async_trait]
pub trait PlatformAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, kind: SourceKind) -> bool;

    /// Returns posts for `source`, ideally restricted to `window`. The
    /// sourcer re-applies the window and cap regardless.
    async fn fetch(&self, source: &Source, window: &FetchWindow) -> Result<SourceBatch, AdapterError>;

    /// Checks a handle + app password pair; returns the account identifier.
    async fn verify_credentials(&self, handle: &str, app_password: &str) -> Result<String, AdapterError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceStatus {
    Ok,
    Failed,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceReport {
    pub kind: SourceKind,
    pub identifier: String,
    pub status: SourceStatus,
    /// Posts the adapter handed back.
    pub received: usize,
    /// Posts kept after the window and the per-source cap.
    pub kept: usize,
    pub out_of_window: usize,
    pub defaulted_counters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchReport {
    pub sources: Vec<SourceReport>,
    pub duplicates_removed: usize,
    pub already_cached: usize,
    pub returned: usize,
}

impl FetchReport {
    pub fn failed_sources(&self) -> usize {
        self.sources.iter().filter(|s| s.status != SourceStatus::Ok).count()
    }

    pub fn is_partial(&self) -> bool {
        self.failed_sources() > 0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SourcingError {
    #[error("SOURCING_FAILED: no source could be fetched")]
    AllSourcesFailed(FetchReport),
    #[error("invalid fetch window {since}..{until} (cap {per_source_cap})")]
    InvalidWindow { since: DateTime<Utc>, until: DateTime<Utc>, per_source_cap: usize },
}

impl SourcingError {
    pub fn code(&self) -> &'static str {
        match self {
            SourcingError::AllSourcesFailed(_) => "SOURCING_FAILED",
            SourcingError::InvalidWindow { .. } => "INVALID_WINDOW",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    pub posts: Vec<Post>,
    pub report: FetchReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourcerSettings {
    pub window_hours: i64,
    pub per_source_cap: usize,
    pub max_in_flight: usize,
    pub per_source_timeout_ms: u64,
}

impl Default for SourcerSettings {
    fn default() -> Self {
        Self { window_hours: 96, per_source_cap: 100, max_in_flight: 4, per_source_timeout_ms: 10_000 }
    }
}

#[derive(Clone)]
pub struct Sourcer {
    adapter: Arc<dyn PlatformAdapter>,
    settings: SourcerSettings,
}

impl fmt::Debug for Sourcer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sourcer").field("adapter", &self.adapter.name()).field("settings", &self.settings).finish()
    }
}

impl Sourcer {
    pub fn new(adapter: Arc<dyn PlatformAdapter>, settings: SourcerSettings) -> Self {
        Self { adapter, settings }
    }

    pub fn adapter(&self) -> &Arc<dyn PlatformAdapter> {
        &self.adapter
    }

    pub fn settings(&self) -> &SourcerSettings {
        &self.settings
    }

    /// Backfill: newest posts inside the initial window, capped per source.
    pub async fn initial_fetch(&self, config: &FeedConfig, now: DateTime<Utc>) -> Result<FetchOutcome, SourcingError> {
        let window = FetchWindow::initial(now, self.settings.window_hours, self.settings.per_source_cap)?;
        self.fetch_window(config, &window, &HashSet::new()).await
    }

    /// Refresh: posts newer than `last_update` that are not cached yet.
    pub async fn incremental_fetch(
        &self,
        config: &FeedConfig,
        last_update: DateTime<Utc>,
        now: DateTime<Utc>,
        cached: &HashSet<String>,
    ) -> Result<FetchOutcome, SourcingError> {
        let window = FetchWindow::incremental(last_update, now, self.settings.per_source_cap)?;
        self.fetch_window(config, &window, cached).await
    }

    async fn fetch_window(
        &self,
        config: &FeedConfig,
        window: &FetchWindow,
        cached: &HashSet<String>,
    ) -> Result<FetchOutcome, SourcingError> {
        let timeout = Duration::from_millis(self.settings.per_source_timeout_ms);
        // `buffered` yields in input order, so completion order never leaks
        // into the merge.
        let jobs: Vec<_> = config.sources.iter().map(|source| self.fetch_one(source, window, timeout)).collect();
        let per_source: Vec<(SourceReport, Vec<Post>)> =
            stream::iter(jobs).buffered(self.settings.max_in_flight.max(1)).collect().await;

        let mut report = FetchReport::default();
        let mut seen: HashSet<String> = HashSet::new();
        let mut posts = Vec::new();
        for (source_report, batch) in per_source {
            report.sources.push(source_report);
            for post in batch {
                if cached.contains(&post.uri) {
                    report.already_cached += 1;
                } else if seen.insert(post.uri.clone()) {
                    posts.push(post);
                } else {
                    report.duplicates_removed += 1;
                }
            }
        }
        report.returned = posts.len();

        if report.sources.iter().all(|s| s.status != SourceStatus::Ok) {
            return Err(SourcingError::AllSourcesFailed(report));
        }
        Ok(FetchOutcome { posts, report })
    }

    async fn fetch_one(&self, source: &Source, window: &FetchWindow, timeout: Duration) -> (SourceReport, Vec<Post>) {
        let mut report = SourceReport {
            kind: source.kind,
            identifier: source.identifier.clone(),
            status: SourceStatus::Ok,
            received: 0,
            kept: 0,
            out_of_window: 0,
            defaulted_counters: 0,
            error: None,
        };
        if !self.adapter.supports(source.kind) {
            report.status = SourceStatus::Unsupported;
            report.error = Some(AdapterError::Unsupported(source.kind).to_string());
            return (report, Vec::new());
        }
        let batch = match tokio::time::timeout(timeout, self.adapter.fetch(source, window)).await {
            Ok(Ok(batch)) => batch,
            Ok(Err(e)) => {
                tracing::warn!(kind = %source.kind, identifier = %source.identifier, error = %e, "source fetch failed");
                report.status = match e {
                    AdapterError::Unsupported(_) => SourceStatus::Unsupported,
                    _ => SourceStatus::Failed,
                };
                report.error = Some(e.to_string());
                return (report, Vec::new());
            }
            Err(_) => {
                tracing::warn!(kind = %source.kind, identifier = %source.identifier, "source fetch timed out");
                report.status = SourceStatus::Failed;
                report.error = Some(format!("timed out after {timeout:?}"));
                return (report, Vec::new());
            }
        };
        report.received = batch.posts.len();
        report.defaulted_counters = batch.defaulted_counters;

        let (mut kept, dropped): (Vec<Post>, Vec<Post>) =
            batch.posts.into_iter().partition(|p| window.contains(p.created_at));
        if !dropped.is_empty() {
            tracing::warn!(
                identifier = %source.identifier,
                dropped = dropped.len(),
                "adapter returned posts outside the fetch window"
            );
        }
        report.out_of_window = dropped.len();

        kept.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| a.uri.cmp(&b.uri)));
        kept.dedup_by(|a, b| a.uri == b.uri);
        kept.truncate(window.per_source_cap);
        kept.sort_by(|a, b| a.uri.cmp(&b.uri));
        for p in &mut kept {
            p.fetched_via = Some(source.clone());
        }
        report.kept = kept.len();
        (report, kept)
    }
}

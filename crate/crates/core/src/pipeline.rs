//! One generation: source → curate → rank, over a persistent candidate pool.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curator::{CurationCache, CurationReport, Curator};
use crate::model::{
    validate_config, weights_for_style, Bucket, DomainError, FeedConfig, Post, PresetWeights, RankingWeights, Source,
    Violation,
};
use crate::ranker::{rank_feed, RankError, RankTriple, RankedEntry};
use crate::sourcer::{FetchReport, Sourcer, SourcingError};

/// Cached posts older than this are evicted from the pool.
pub const DEFAULT_RETENTION_DAYS: i64 = 7;

/// Everything carried between generations of one feed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub posts: Vec<Post>,
    pub last_fetch_at: Option<DateTime<Utc>>,
    pub sources_fingerprint: String,
    pub curation: CurationCache,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    /// New posts retrieved in this run.
    pub fetched: usize,
    /// Size of the candidate pool that was curated and ranked.
    pub candidates: usize,
    pub eligible: usize,
    pub excluded: usize,
    pub ranked: usize,
}

/// Per-post record of how an entry got its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDetail {
    pub uri: String,
    pub score: u8,
    pub bucket: Bucket,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_via: Option<Source>,
    pub ranks: RankTriple,
    pub post: Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub ranked: Vec<RankedEntry>,
    pub details: Vec<EntryDetail>,
    pub weights: RankingWeights,
    pub counts: StageCounts,
    pub fetch_report: FetchReport,
    pub curation_report: CurationReport,
    /// True when this run did a full backfill rather than a refresh.
    pub backfill: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("config has {} violation(s)", .0.len())]
    InvalidConfig(Vec<Violation>),
    #[error(transparent)]
    Weights(#[from] DomainError),
    #[error(transparent)]
    Sourcing(#[from] SourcingError),
    #[error(transparent)]
    Ranking(#[from] RankError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::InvalidConfig(_) => "INVALID_CONFIG",
            PipelineError::Weights(_) => "INVALID_WEIGHTS",
            PipelineError::Sourcing(e) => e.code(),
            PipelineError::Ranking(_) => "RANKING_FAILED",
        }
    }
}

/// Identity of a config's source list; a change forces a fresh backfill.
pub fn sources_fingerprint(sources: &[Source]) -> String {
    let mut hasher = Sha256::new();
    for s in sources {
        hasher.update(s.kind.as_str().as_bytes());
        hasher.update([0]);
        hasher.update(s.identifier.as_bytes());
        hasher.update([0]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    sourcer: Sourcer,
    curator: Curator,
    presets: PresetWeights,
    retention: Duration,
}

impl Pipeline {
    pub fn new(sourcer: Sourcer, curator: Curator, presets: PresetWeights) -> Self {
        Self { sourcer, curator, presets, retention: Duration::days(DEFAULT_RETENTION_DAYS) }
    }

    pub fn with_retention(mut self, retention: Duration) -> Self {
        self.retention = retention;
        self
    }

    pub fn presets(&self) -> &PresetWeights {
        &self.presets
    }

    pub fn sourcer(&self) -> &Sourcer {
        &self.sourcer
    }

    /// Runs one generation against `state` and returns the new state next to
    /// the result. `state` itself is untouched so a failed run leaves
    /// nothing half-applied.
    pub async fn generate(
        &self,
        config: &FeedConfig,
        state: &PoolState,
        weights_override: Option<&RankingWeights>,
        now: DateTime<Utc>,
    ) -> Result<(PipelineRun, PoolState), PipelineError> {
        let violations = validate_config(config);
        if !violations.is_empty() {
            return Err(PipelineError::InvalidConfig(violations));
        }
        let weights = match weights_override {
            Some(w) => {
                w.validate()?;
                w.clone()
            }
            None => weights_for_style(&config.ranking, &self.presets)?,
        };

        let fingerprint = sources_fingerprint(&config.sources);
        let mut next = state.clone();
        let backfill = state.last_fetch_at.is_none() || state.sources_fingerprint != fingerprint;
        let (fetched, fetch_report) = if backfill {
            let outcome = self.sourcer.initial_fetch(config, now).await?;
            next.posts = outcome.posts;
            (next.posts.len(), outcome.report)
        } else {
            let last = state.last_fetch_at.expect("checked above");
            if now > last {
                let cached: HashSet<String> = state.posts.iter().map(|p| p.uri.clone()).collect();
                let outcome = self.sourcer.incremental_fetch(config, last, now, &cached).await?;
                let n = outcome.posts.len();
                next.posts.extend(outcome.posts);
                (n, outcome.report)
            } else {
                (0, FetchReport::default())
            }
        };
        next.last_fetch_at = Some(now);
        next.sources_fingerprint = fingerprint;

        let horizon = now - self.retention;
        next.posts.retain(|p| p.created_at >= horizon);

        let curation = self.curator.curate_cached(&next.posts, config, &mut next.curation).await;
        let live: HashSet<&str> = next.posts.iter().map(|p| p.uri.as_str()).collect();
        next.curation.retain_uris(|uri| live.contains(uri));

        let ranked = rank_feed(&next.posts, &curation.eligible, &weights)?;

        let by_uri: HashMap<&str, &crate::model::CuratedPost> =
            curation.eligible.iter().map(|cp| (cp.post.uri.as_str(), cp)).collect();
        let details = ranked
            .iter()
            .map(|entry| {
                let cp = by_uri[entry.uri.as_str()];
                EntryDetail {
                    uri: entry.uri.clone(),
                    score: cp.score().value(),
                    bucket: cp.bucket(),
                    rationale: cp.rationale.clone(),
                    fetched_via: cp.post.fetched_via.clone(),
                    ranks: entry.ranks.clone(),
                    post: cp.post.clone(),
                }
            })
            .collect();

        let counts = StageCounts {
            fetched,
            candidates: next.posts.len(),
            eligible: curation.eligible.len(),
            excluded: curation.excluded.len(),
            ranked: ranked.len(),
        };
        Ok((
            PipelineRun { ranked, details, weights, counts, fetch_report, curation_report: curation.report, backfill },
            next,
        ))
    }
}

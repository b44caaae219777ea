//! Generation runs: single-flight per feed, atomic publication, history.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};

use bonsai_core::curator::CurationReport;
use bonsai_core::pipeline::{EntryDetail, Pipeline, PipelineError, StageCounts};
use bonsai_core::ranker::materialize;
use bonsai_core::sourcer::{FetchReport, SourcingError};
use bonsai_core::{MaterializedFeed, RankingWeights};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::Instrument;

use crate::clock::Clock;
use crate::store::{FeedStore, StoreError};

/// What the skeleton endpoint serves, plus the per-entry backtrace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedGeneration {
    pub run_id: String,
    pub feed: MaterializedFeed,
    pub details: Vec<EntryDetail>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Manual,
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Degraded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub run_id: String,
    pub feed_id: String,
    /// Set when the run published a generation.
    pub generation_id: Option<u64>,
    pub trigger: Trigger,
    pub status: RunStatus,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub backfill: bool,
    pub counts: StageCounts,
    pub fetch_report: FetchReport,
    pub curation_report: CurationReport,
    pub weights_used: Option<RankingWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RunError>,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("feed {0} not found")]
    NotFound(String),
    #[error("a generation run is already in flight for feed {0}")]
    InFlight(String),
    #[error("{}", .0.error.as_ref().map(|e| e.message.as_str()).unwrap_or("generation failed"))]
    Failed(Box<GenerationRun>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl GenerateError {
    pub fn code(&self) -> String {
        match self {
            GenerateError::NotFound(_) => "FEED_NOT_FOUND".into(),
            GenerateError::InFlight(_) => "RUN_IN_FLIGHT".into(),
            GenerateError::Failed(run) => {
                run.error.as_ref().map(|e| e.code.clone()).unwrap_or_else(|| "RUN_FAILED".into())
            }
            GenerateError::Store(_) => "STORAGE_FAILED".into(),
        }
    }
}

/// The currently served generation of every feed. Readers clone an `Arc`
/// under a short read lock; a swap replaces the `Arc` whole.
#[derive(Debug, Default)]
pub struct Publications {
    map: RwLock<HashMap<String, Arc<PublishedGeneration>>>,
}

impl Publications {
    pub fn get(&self, feed_id: &str) -> Option<Arc<PublishedGeneration>> {
        self.map.read().expect("publications lock").get(feed_id).cloned()
    }

    pub fn publish(&self, generation: Arc<PublishedGeneration>) {
        let id = generation.feed.feed_id.clone();
        self.map.write().expect("publications lock").insert(id, generation);
    }

    pub fn remove(&self, feed_id: &str) {
        self.map.write().expect("publications lock").remove(feed_id);
    }

    /// Loads every persisted generation.
    pub fn load(store: &dyn FeedStore) -> Result<Self, StoreError> {
        let this = Self::default();
        for id in store.list_feed_ids()? {
            if let Some(generation) = store.load_published(&id)? {
                this.publish(Arc::new(generation));
            }
        }
        Ok(this)
    }
}

/// Keyed single-flight set.
#[derive(Debug, Default, Clone)]
pub struct SingleFlight {
    running: Arc<Mutex<HashSet<String>>>,
}

pub struct FlightGuard {
    running: Arc<Mutex<HashSet<String>>>,
    key: String,
}

impl Drop for FlightGuard {
    fn drop(&mut self) {
        self.running.lock().expect("single-flight lock").remove(&self.key);
    }
}

impl SingleFlight {
    pub fn try_acquire(&self, key: &str) -> Option<FlightGuard> {
        let mut running = self.running.lock().expect("single-flight lock");
        if running.insert(key.to_string()) {
            Some(FlightGuard { running: Arc::clone(&self.running), key: key.to_string() })
        } else {
            None
        }
    }

    pub fn is_running(&self, key: &str) -> bool {
        self.running.lock().expect("single-flight lock").contains(key)
    }
}

pub struct Generator {
    pipeline: Pipeline,
    store: Arc<dyn FeedStore>,
    published: Arc<Publications>,
    flights: SingleFlight,
    clock: Arc<dyn Clock>,
    history_limit: usize,
}

impl Generator {
    pub fn new(
        pipeline: Pipeline,
        store: Arc<dyn FeedStore>,
        published: Arc<Publications>,
        clock: Arc<dyn Clock>,
        history_limit: usize,
    ) -> Self {
        Self { pipeline, store, published, flights: SingleFlight::default(), clock, history_limit }
    }

    pub fn flights(&self) -> &SingleFlight {
        &self.flights
    }

    pub fn publications(&self) -> &Arc<Publications> {
        &self.published
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// Runs one generation for `feed_id`, refusing if one is already running.
    pub async fn run(&self, feed_id: &str, trigger: Trigger) -> Result<GenerationRun, GenerateError> {
        let guard = self.flights.try_acquire(feed_id).ok_or_else(|| GenerateError::InFlight(feed_id.to_string()))?;
        let run_id = uuid::Uuid::new_v4().to_string();
        let span = tracing::info_span!("generation", %run_id, feed_id, ?trigger);
        let result = self.run_locked(feed_id, trigger, run_id).instrument(span).await;
        drop(guard);
        result
    }

    async fn run_locked(
        &self,
        feed_id: &str,
        trigger: Trigger,
        run_id: String,
    ) -> Result<GenerationRun, GenerateError> {
        let config = self.store.load_config(feed_id)?.ok_or_else(|| GenerateError::NotFound(feed_id.to_string()))?;
        let started_at = self.clock.now();
        let pool = self.store.load_pool(feed_id)?.unwrap_or_default();
        tracing::info!(sources = config.sources.len(), cached = pool.posts.len(), "generation started");

        let mut record = GenerationRun {
            run_id: run_id.clone(),
            feed_id: feed_id.to_string(),
            generation_id: None,
            trigger,
            status: RunStatus::Failed,
            started_at,
            finished_at: started_at,
            backfill: false,
            counts: StageCounts::default(),
            fetch_report: FetchReport::default(),
            curation_report: CurationReport::default(),
            weights_used: None,
            error: None,
        };

        let (outcome, next_pool) = match self.pipeline.generate(&config, &pool, None, started_at).await {
            Ok(ok) => ok,
            Err(e) => {
                if let PipelineError::Sourcing(SourcingError::AllSourcesFailed(report)) = &e {
                    record.fetch_report = report.clone();
                }
                return Err(self.fail(record, e.code(), e.to_string()));
            }
        };
        record.backfill = outcome.backfill;
        record.counts = outcome.counts;
        record.fetch_report = outcome.fetch_report.clone();
        record.curation_report = outcome.curation_report.clone();
        record.weights_used = Some(outcome.weights.clone());

        // A delete that landed while the pipeline ran wins.
        if self.store.load_config(feed_id)?.is_none() {
            return Err(GenerateError::NotFound(feed_id.to_string()));
        }

        let generation_id = self.last_generation_id(feed_id)? + 1;
        let finished_at = self.clock.now();
        let generation = PublishedGeneration {
            run_id: run_id.clone(),
            feed: materialize(feed_id, generation_id, &outcome.ranked, &outcome.weights, finished_at),
            details: outcome.details,
        };

        if let Err(e) = self.store.save_pool(feed_id, &next_pool) {
            return Err(self.fail(record, "STORAGE_FAILED", e.to_string()));
        }
        if let Err(e) = self.store.save_published(feed_id, &generation) {
            return Err(self.fail(record, "STORAGE_FAILED", e.to_string()));
        }
        self.published.publish(Arc::new(generation));

        record.generation_id = Some(generation_id);
        record.status = if record.curation_report.degraded { RunStatus::Degraded } else { RunStatus::Ok };
        record.finished_at = finished_at;
        tracing::info!(
            generation_id,
            fetched = record.counts.fetched,
            eligible = record.counts.eligible,
            ranked = record.counts.ranked,
            status = ?record.status,
            "generation published"
        );
        self.append_history(&record);
        Ok(record)
    }

    fn last_generation_id(&self, feed_id: &str) -> Result<u64, StoreError> {
        let in_memory = self.published.get(feed_id).map(|g| g.feed.generation_id);
        let on_disk = match in_memory {
            Some(_) => None,
            None => self.store.load_published(feed_id)?.map(|g| g.feed.generation_id),
        };
        let from_runs = self.store.load_runs(feed_id)?.iter().filter_map(|r| r.generation_id).max();
        Ok([in_memory, on_disk, from_runs].into_iter().flatten().max().unwrap_or(0))
    }

    fn fail(&self, mut record: GenerationRun, code: &str, message: String) -> GenerateError {
        record.status = RunStatus::Failed;
        record.finished_at = self.clock.now();
        record.error = Some(RunError { code: code.to_string(), message });
        tracing::warn!(code, error = %record.error.as_ref().map(|e| e.message.as_str()).unwrap_or(""), "generation failed");
        self.append_history(&record);
        GenerateError::Failed(Box::new(record))
    }

    fn append_history(&self, record: &GenerationRun) {
        let result = self.store.load_runs(&record.feed_id).and_then(|mut runs| {
            runs.push(record.clone());
            let excess = runs.len().saturating_sub(self.history_limit);
            runs.drain(..excess);
            self.store.save_runs(&record.feed_id, &runs)
        });
        if let Err(e) = result {
            tracing::warn!(error = %e, "could not record run history");
        }
    }
}

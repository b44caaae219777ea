//! HTTP feed service.
//!
//! Owns feed configs, runs generations (manually or on the refresh
//! schedule), persists their output and serves it through the
//! `getFeedSkeleton` endpoint social clients call.

pub mod api;
pub mod auth;
pub mod clock;
pub mod config;
pub mod generation;
pub mod scheduler;
pub mod skeleton;
pub mod store;

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use bonsai_core::catalog::{Catalog, CatalogError};
use bonsai_core::curator::Curator;
use bonsai_core::lm::{HttpBackend, LmClient, MockBackend, MockRules, MockRulesError};
use bonsai_core::pipeline::Pipeline;
use bonsai_core::planner::Planner;
use bonsai_core::sourcer::{AtprotoAdapter, FixtureAdapter, FixtureError, PlatformAdapter, Sourcer};

use crate::auth::Sessions;
use crate::clock::{Clock, FrozenClock, SystemClock};
use crate::config::{AdapterKind, ConfigError, LmProvider, ServiceConfig};
use crate::generation::{Generator, Publications};
use crate::store::{FeedStore, FileStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Corpus(#[from] FixtureError),
    #[error(transparent)]
    MockRules(#[from] MockRulesError),
    #[error("language model provider: {0}")]
    Provider(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

/// Everything a request handler or the scheduler needs.
#[derive(Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub store: Arc<dyn FeedStore>,
    pub generator: Arc<Generator>,
    pub planner: Planner,
    pub sessions: Arc<Sessions>,
    pub clock: Arc<dyn Clock>,
}

/// Injectable pieces; [`AppState::from_config`] builds them from the config
/// file, tests supply their own.
pub struct Components {
    pub adapter: Arc<dyn PlatformAdapter>,
    pub lm: LmClient,
    pub catalog: Catalog,
    pub store: Arc<dyn FeedStore>,
    pub clock: Arc<dyn Clock>,
}

impl AppState {
    pub fn from_config(config: ServiceConfig) -> Result<Self, StartupError> {
        let adapter: Arc<dyn PlatformAdapter> = match config.adapter.kind {
            AdapterKind::Fixture => {
                let corpus =
                    config.adapter.corpus.as_ref().ok_or_else(|| {
                        ConfigError::Invalid("adapter.corpus is required for the fixture adapter".into())
                    })?;
                let mut adapter = FixtureAdapter::load(corpus)?;
                for c in &config.adapter.credentials {
                    adapter = adapter.with_credentials(&c.handle, &c.app_password);
                }
                if config.adapter.latency_ms > 0 {
                    adapter = adapter.with_latency(Duration::from_millis(config.adapter.latency_ms));
                }
                Arc::new(adapter)
            }
            AdapterKind::Atproto => {
                let at = config.adapter.atproto.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("adapter.atproto is required for the atproto adapter".into())
                })?;
                Arc::new(AtprotoAdapter::new(at))
            }
        };
        let lm = match config.lm.provider {
            LmProvider::Mock => {
                let rules = match &config.lm.mock_rules {
                    Some(path) => MockRules::load(path)?,
                    None => MockRules::default(),
                };
                LmClient::new(Arc::new(MockBackend::new(rules)), config.lm.limits.clone())
            }
            LmProvider::Remote => {
                let remote = config.lm.remote.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("lm.remote is required when lm.provider = \"remote\"".into())
                })?;
                let backend = HttpBackend::new(remote).map_err(|e| StartupError::Provider(e.to_string()))?;
                LmClient::new(Arc::new(backend), config.lm.limits.clone())
            }
        };
        let catalog = match &config.catalog.path {
            Some(path) => {
                let (catalog, report) = Catalog::ingest(path)?;
                let (feeds, lists, packs) = report.counts();
                tracing::info!(feeds, lists, packs, skipped = report.skipped.len(), "catalog loaded");
                catalog
            }
            None => Catalog::empty(),
        };
        let store: Arc<dyn FeedStore> = Arc::new(FileStore::open(&config.storage.data_dir)?);
        let clock: Arc<dyn Clock> = match config.clock.frozen_now {
            Some(t) => Arc::new(FrozenClock(t)),
            None => Arc::new(SystemClock),
        };
        Self::assemble(config, Components { adapter, lm, catalog, store, clock })
    }

    pub fn assemble(config: ServiceConfig, parts: Components) -> Result<Self, StartupError> {
        config.validate()?;
        let sourcer = Sourcer::new(Arc::clone(&parts.adapter), config.sourcing.clone());
        let pipeline = Pipeline::new(sourcer, Curator::new(parts.lm.clone()), config.presets.clone())
            .with_retention(chrono::Duration::days(config.feeds.retention_days));
        let published = Arc::new(Publications::load(parts.store.as_ref())?);
        let generator = Generator::new(
            pipeline,
            Arc::clone(&parts.store),
            published,
            Arc::clone(&parts.clock),
            config.feeds.history_limit,
        );
        Ok(Self {
            config: Arc::new(config),
            store: parts.store,
            generator: Arc::new(generator),
            planner: Planner::new(Arc::new(parts.catalog), parts.lm),
            sessions: Arc::new(Sessions::new(parts.adapter)),
            clock: parts.clock,
        })
    }
}

/// Serves the API on `listener` and runs the refresh scheduler until
/// `shutdown` resolves.
pub async fn serve(
    state: AppState,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let scheduler = state.config.scheduler.enabled.then(|| scheduler::spawn(state.clone(), stop_rx));
    let app = api::router(state);
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    let _ = stop_tx.send(true);
    if let Some(handle) = scheduler {
        let _ = handle.await;
    }
    result
}

/// Binds the configured address and serves until ctrl-c.
pub async fn run(config: ServiceConfig) -> Result<(), StartupError> {
    let addr = config.bind_addr();
    let state = AppState::from_config(config)?;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| StartupError::Bind { addr: addr.clone(), source })?;
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or(addr);
    tracing::info!(addr = %local, "listening");
    serve(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|source| StartupError::Bind { addr: local, source })
}

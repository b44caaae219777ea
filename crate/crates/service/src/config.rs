//! Declarative service configuration.
//!
//! One TOML file; any key can be overridden from the environment as
//! `BONSAI__<SECTION>__<KEY>`, e.g. `BONSAI__SERVER__PORT=9000`.

use std::path::{Path, PathBuf};

use bonsai_core::lm::{LmSettings, RemoteProviderConfig};
use bonsai_core::sourcer::{AtprotoConfig, SourcerSettings};
use bonsai_core::PresetWeights;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "BONSAI";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot load configuration: {0}")]
    Load(#[from] config::ConfigError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self { host: "0.0.0.0".into(), port: 8080 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageSection {
    pub data_dir: PathBuf,
}

impl Default for StorageSection {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("data") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    pub enabled: bool,
    pub interval_secs: f64,
    /// Fractional spread applied to each feed's interval, 0.1 = ±10%.
    pub jitter: f64,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        Self { enabled: true, interval_secs: 1800.0, jitter: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmProvider {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSection {
    pub provider: LmProvider,
    pub mock_rules: Option<PathBuf>,
    pub remote: Option<RemoteProviderConfig>,
    pub limits: LmSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    #[default]
    Fixture,
    Atproto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCredential {
    pub handle: String,
    pub app_password: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterSection {
    pub kind: AdapterKind,
    /// JSON-lines corpus for the fixture adapter.
    pub corpus: Option<PathBuf>,
    /// Artificial delay per fixture fetch.
    pub latency_ms: u64,
    /// Handle/app-password pairs the fixture adapter accepts.
    pub credentials: Vec<TestCredential>,
    pub atproto: Option<AtprotoConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedsSection {
    /// DID that owns the published feed generator records.
    pub publisher_did: String,
    pub retention_days: i64,
    pub history_limit: usize,
}

impl Default for FeedsSection {
    fn default() -> Self {
        Self { publisher_did: "did:web:localhost".into(), retention_days: 7, history_limit: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockSection {
    /// Pins the pipeline clock, for fixture corpora with fixed timestamps.
    pub frozen_now: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub server: ServerSection,
    pub storage: StorageSection,
    pub scheduler: SchedulerSection,
    pub sourcing: SourcerSettings,
    pub lm: LmSection,
    pub adapter: AdapterSection,
    pub catalog: CatalogSection,
    pub presets: PresetWeights,
    pub feeds: FeedsSection,
    pub clock: ClockSection,
}

impl ServiceConfig {
    /// Reads `path`, applies environment overrides, resolves relative paths
    /// against the file's directory and validates the result.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(ConfigError::Invalid(format!("{} is not a readable file", path.display())));
        }
        let raw = config::Config::builder()
            .add_source(config::File::from(path).format(config::FileFormat::Toml))
            .add_source(
                config::Environment::with_prefix(ENV_PREFIX).prefix_separator("__").separator("__").try_parsing(true),
            )
            .build()?;
        let mut cfg: ServiceConfig = raw.try_deserialize()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses TOML text without environment overrides. Paths stay as written.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw =
            config::Config::builder().add_source(config::File::from_str(text, config::FileFormat::Toml)).build()?;
        let cfg: ServiceConfig = raw.try_deserialize()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.storage.data_dir);
        for p in [&mut self.lm.mock_rules, &mut self.adapter.corpus, &mut self.catalog.path].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !self.scheduler.interval_secs.is_finite() || self.scheduler.interval_secs <= 0.0 {
            return invalid("scheduler.interval_secs must be positive");
        }
        if !(0.0..0.5).contains(&self.scheduler.jitter) {
            return invalid("scheduler.jitter must be in [0, 0.5)");
        }
        if self.sourcing.window_hours <= 0 || self.sourcing.per_source_cap == 0 {
            return invalid("sourcing.window_hours and sourcing.per_source_cap must be positive");
        }
        if self.feeds.retention_days <= 0 || self.feeds.history_limit == 0 {
            return invalid("feeds.retention_days and feeds.history_limit must be positive");
        }
        if self.feeds.publisher_did.trim().is_empty() {
            return invalid("feeds.publisher_did is empty");
        }
        self.presets.validate().map_err(|e| ConfigError::Invalid(format!("presets: {e}")))?;
        match self.adapter.kind {
            AdapterKind::Fixture if self.adapter.corpus.is_none() => {
                return invalid("adapter.corpus is required for the fixture adapter")
            }
            AdapterKind::Atproto if self.adapter.atproto.is_none() => {
                return invalid("adapter.atproto is required for the atproto adapter")
            }
            _ => {}
        }
        if self.lm.provider == LmProvider::Remote && self.lm.remote.is_none() {
            return invalid("lm.remote is required when lm.provider = \"remote\"");
        }
        Ok(())
    }

    pub fn bind_addr(&self) -> String {
        format!("{}:{}", self.server.host, self.server.port)
    }
}

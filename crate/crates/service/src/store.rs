//! Persistence for configs, candidate pools, published generations and run
//! history.
//!
//! [`FileStore`] keeps one directory per feed and replaces files by writing
//! a temporary sibling and renaming it over the target, so a reader (or a
//! restarted process) only ever sees a complete old or complete new file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bonsai_core::pipeline::PoolState;
use bonsai_core::FeedConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::generation::{GenerationRun, PublishedGeneration};

const CONFIG_FILE: &str = "config.json";
const POOL_FILE: &str = "pool.json";
const PUBLISHED_FILE: &str = "published.json";
const RUNS_FILE: &str = "runs.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt record {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("feed id {0:?} is not usable as a storage key")]
    InvalidId(String),
    #[error("storage unavailable: {0}")]
    Unavailable(String),
}

pub trait FeedStore: Send + Sync {
    fn list_feed_ids(&self) -> Result<Vec<String>, StoreError>;
    fn load_config(&self, feed_id: &str) -> Result<Option<FeedConfig>, StoreError>;
    fn save_config(&self, config: &FeedConfig) -> Result<(), StoreError>;
    /// Removes the config and everything derived from it.
    fn delete_feed(&self, feed_id: &str) -> Result<(), StoreError>;
    fn load_pool(&self, feed_id: &str) -> Result<Option<PoolState>, StoreError>;
    fn save_pool(&self, feed_id: &str, pool: &PoolState) -> Result<(), StoreError>;
    fn load_published(&self, feed_id: &str) -> Result<Option<PublishedGeneration>, StoreError>;
    fn save_published(&self, feed_id: &str, generation: &PublishedGeneration) -> Result<(), StoreError>;
    fn load_runs(&self, feed_id: &str) -> Result<Vec<GenerationRun>, StoreError>;
    fn save_runs(&self, feed_id: &str, runs: &[GenerationRun]) -> Result<(), StoreError>;
}

/// Feed ids become directory names, so they are restricted to a safe set.
pub fn check_feed_id(feed_id: &str) -> Result<(), StoreError> {
    let ok = !feed_id.is_empty()
        && feed_id.len() <= 64
        && feed_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(feed_id.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    /// Opens (creating if needed) a store rooted at `dir` and checks that it
    /// is writable.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = dir.as_ref().to_path_buf();
        let feeds = root.join("feeds");
        fs::create_dir_all(&feeds).map_err(|e| StoreError::Unavailable(format!("{}: {e}", feeds.display())))?;
        let probe = root.join(".write-probe");
        fs::write(&probe, b"ok").map_err(|e| StoreError::Unavailable(format!("{}: {e}", root.display())))?;
        let _ = fs::remove_file(&probe);
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn feed_dir(&self, feed_id: &str) -> Result<PathBuf, StoreError> {
        check_feed_id(feed_id)?;
        Ok(self.root.join("feeds").join(feed_id))
    }

    fn read<T: DeserializeOwned>(&self, feed_id: &str, file: &str) -> Result<Option<T>, StoreError> {
        let path = self.feed_dir(feed_id)?.join(file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(StoreError::Io { path: path.display().to_string(), source }),
        };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    fn write<T: Serialize + ?Sized>(&self, feed_id: &str, file: &str, value: &T) -> Result<(), StoreError> {
        let dir = self.feed_dir(feed_id)?;
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| StoreError::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let target = dir.join(file);
        let tmp = dir.join(format!(".{file}.{}.tmp", uuid::Uuid::new_v4().simple()));
        let bytes = serde_json::to_vec(value)
            .map_err(|e| StoreError::Corrupt { path: target.display().to_string(), message: e.to_string() })?;
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)?;
            if let Ok(d) = fs::File::open(&dir) {
                let _ = d.sync_all();
            }
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result.map_err(io(&target))
    }
}

impl FeedStore for FileStore {
    fn list_feed_ids(&self) -> Result<Vec<String>, StoreError> {
        let feeds = self.root.join("feeds");
        let entries =
            fs::read_dir(&feeds).map_err(|source| StoreError::Io { path: feeds.display().to_string(), source })?;
        let mut ids = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().to_string();
            if check_feed_id(&name).is_ok() && entry.path().join(CONFIG_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn load_config(&self, feed_id: &str) -> Result<Option<FeedConfig>, StoreError> {
        self.read(feed_id, CONFIG_FILE)
    }

    fn save_config(&self, config: &FeedConfig) -> Result<(), StoreError> {
        self.write(&config.feed_id, CONFIG_FILE, config)
    }

    fn delete_feed(&self, feed_id: &str) -> Result<(), StoreError> {
        let dir = self.feed_dir(feed_id)?;
        match fs::remove_dir_all(&dir) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(source) => Err(StoreError::Io { path: dir.display().to_string(), source }),
        }
    }

    fn load_pool(&self, feed_id: &str) -> Result<Option<PoolState>, StoreError> {
        self.read(feed_id, POOL_FILE)
    }

    fn save_pool(&self, feed_id: &str, pool: &PoolState) -> Result<(), StoreError> {
        self.write(feed_id, POOL_FILE, pool)
    }

    fn load_published(&self, feed_id: &str) -> Result<Option<PublishedGeneration>, StoreError> {
        self.read(feed_id, PUBLISHED_FILE)
    }

    fn save_published(&self, feed_id: &str, generation: &PublishedGeneration) -> Result<(), StoreError> {
        self.write(feed_id, PUBLISHED_FILE, generation)
    }

    fn load_runs(&self, feed_id: &str) -> Result<Vec<GenerationRun>, StoreError> {
        Ok(self.read(feed_id, RUNS_FILE)?.unwrap_or_default())
    }

    fn save_runs(&self, feed_id: &str, runs: &[GenerationRun]) -> Result<(), StoreError> {
        self.write(feed_id, RUNS_FILE, runs)
    }
}

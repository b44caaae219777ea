//! Read-only directory of feeds, lists and starter packs the planner searches.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::SourceKind;

/// Feeds below this many likes are dropped on ingest.
pub const MIN_FEED_LIKES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    Feed,
    List,
    StarterPack,
}

impl From<CatalogKind> for SourceKind {
    fn from(k: CatalogKind) -> Self {
        match k {
            CatalogKind::Feed => SourceKind::Feed,
            CatalogKind::List => SourceKind::List,
            CatalogKind::StarterPack => SourceKind::StarterPack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub kind: CatalogKind,
    pub uri: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub likes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub feeds: usize,
    pub lists: usize,
    pub starter_packs: usize,
    /// Feeds dropped for having fewer than two likes (by uri).
    pub dropped_low_likes: Vec<String>,
    pub skipped: Vec<SkippedLine>,
}

impl IngestReport {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.feeds, self.lists, self.starter_packs)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("catalog has no valid entries")]
    Empty,
    #[error("search query is empty")]
    EmptyQuery,
}

#[derive(Debug, Clone)]
struct Indexed {
    entry: CatalogEntry,
    haystack_title: String,
    haystack_description: String,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<Indexed>,
}

impl Catalog {
    /// A catalog with no entries; every search comes back empty.
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn ingest(path: impl AsRef<Path>) -> Result<(Self, IngestReport), CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
        Self::from_jsonl(&text)
    }

    /// Parses JSON lines. Bad lines are skipped and reported, not fatal.
    pub fn from_jsonl(text: &str) -> Result<(Self, IngestReport), CatalogError> {
        let mut report = IngestReport::default();
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CatalogEntry = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(e) => {
                    tracing::warn!(line = line_no, error = %e, "skipping malformed catalog line");
                    report.skipped.push(SkippedLine { line: line_no, reason: e.to_string() });
                    continue;
                }
            };
            if entry.uri.trim().is_empty() {
                report.skipped.push(SkippedLine { line: line_no, reason: "empty uri".into() });
                continue;
            }
            if entry.kind == CatalogKind::Feed && entry.likes < MIN_FEED_LIKES {
                report.dropped_low_likes.push(entry.uri);
                continue;
            }
            if !seen.insert(entry.uri.clone()) {
                tracing::warn!(line = line_no, uri = %entry.uri, "skipping duplicate catalog uri");
                report.skipped.push(SkippedLine { line: line_no, reason: format!("duplicate uri {}", entry.uri) });
                continue;
            }
            match entry.kind {
                CatalogKind::Feed => report.feeds += 1,
                CatalogKind::List => report.lists += 1,
                CatalogKind::StarterPack => report.starter_packs += 1,
            }
            entries.push(Indexed {
                haystack_title: entry.title.to_lowercase(),
                haystack_description: entry.description.to_lowercase(),
                entry,
            });
        }
        if !report.dropped_low_likes.is_empty() {
            tracing::info!(dropped = report.dropped_low_likes.len(), "dropped feeds with fewer than two likes");
        }
        if entries.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok((Self { entries }, report))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().map(|i| &i.entry)
    }

    /// Case-insensitive substring match on title or description, most liked
    /// first, then by title.
    pub fn search(
        &self,
        query: &str,
        kinds: Option<&[CatalogKind]>,
        limit: usize,
    ) -> Result<Vec<CatalogEntry>, CatalogError> {
        let needle = query.trim().to_lowercase();
        if needle.is_empty() {
            return Err(CatalogError::EmptyQuery);
        }
        let mut hits: Vec<&CatalogEntry> = self
            .entries
            .iter()
            .filter(|i| kinds.is_none_or(|ks| ks.contains(&i.entry.kind)))
            .filter(|i| i.haystack_title.contains(&needle) || i.haystack_description.contains(&needle))
            .map(|i| &i.entry)
            .collect();
        hits.sort_by(|a, b| b.likes.cmp(&a.likes).then_with(|| a.title.cmp(&b.title)).then_with(|| a.uri.cmp(&b.uri)));
        Ok(hits.into_iter().take(limit).cloned().collect())
    }
}

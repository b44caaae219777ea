//! `app.bsky.feed.getFeedSkeleton` pagination over a published generation.

use bonsai_core::MaterializedFeed;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 100;

/// Position inside one generation, rendered as `g<generation>:<offset>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    pub generation_id: u64,
    pub offset: usize,
}

impl Cursor {
    pub fn parse(text: &str) -> Option<Self> {
        let (generation, offset) = text.strip_prefix('g')?.split_once(':')?;
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(generation) || !all_digits(offset) {
            return None;
        }
        Some(Self { generation_id: generation.parse().ok()?, offset: offset.parse().ok()? })
    }
}

impl std::fmt::Display for Cursor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g{}:{}", self.generation_id, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonItem {
    pub post: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<String>,
    pub feed: Vec<SkeletonItem>,
}

/// Clamps a requested page size into `1..=MAX_LIMIT`.
pub fn effective_limit(requested: Option<i64>) -> usize {
    match requested {
        None => DEFAULT_LIMIT,
        Some(n) => n.clamp(1, MAX_LIMIT as i64) as usize,
    }
}

/// One page of `feed`. A cursor from any other generation restarts at the
/// top; the returned cursor is omitted once the feed is exhausted.
pub fn page(feed: &MaterializedFeed, limit: usize, cursor: Option<Cursor>) -> Skeleton {
    let start = match cursor {
        Some(c) if c.generation_id == feed.generation_id => c.offset.min(feed.len()),
        _ => 0,
    };
    let end = (start + limit).min(feed.len());
    let items = feed.entries[start..end].iter().map(|e| SkeletonItem { post: e.uri.clone() }).collect();
    let cursor = (end < feed.len()).then(|| Cursor { generation_id: feed.generation_id, offset: end }.to_string());
    Skeleton { cursor, feed: items }
}

pub fn feed_uri(publisher_did: &str, feed_id: &str) -> String {
    format!("at://{publisher_did}/app.bsky.feed.generator/{feed_id}")
}

/// Extracts the feed id from a feed generator uri owned by `publisher_did`.
pub fn parse_feed_uri<'a>(publisher_did: &str, uri: &'a str) -> Option<&'a str> {
    let rest = uri.strip_prefix("at://")?;
    let (did, rest) = rest.split_once('/')?;
    let rkey = rest.strip_prefix("app.bsky.feed.generator/")?;
    (did == publisher_did && !rkey.is_empty() && !rkey.contains('/')).then_some(rkey)
}

//! Weighted Borda Count over relevance, popularity and recency.
//!
//! Each eligible post gets three positional ranks (1 = best):
//!
//! * relevance: over eligible posts only, by curation score descending;
//! * recency: over *all* candidates, newest first;
//! * engagement: over *all* candidates, by `likes + 3·reposts + 2·replies`
//!   descending.
//!
//! The aggregate is `w_r·r_relevance + w_p·r_engagement + w_c·r_recency`
//! and lower is better. Whenever two values compare equal (inside a single
//! ranking or on the aggregate) the newer post wins, then the smaller uri.
//!
//! Weights are exact rationals, so aggregates are compared as integers scaled
//! by the common denominator of the three weights. Ties therefore depend only
//! on the weights and ranks, never on float rounding.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::model::{CuratedPost, DomainError, FeedEntry, MaterializedFeed, Post, RankingWeights, Score, Weight};

const REPOST_WEIGHT: u64 = 3;
const REPLY_WEIGHT: u64 = 2;

/// `likes + 3 × reposts + 2 × replies`, saturating at `u64::MAX`.
pub fn engagement_score(post: &Post) -> u64 {
    engagement_from_counts(post.likes, post.reposts, post.replies)
}

pub fn engagement_from_counts(likes: u64, reposts: u64, replies: u64) -> u64 {
    likes.saturating_add(reposts.saturating_mul(REPOST_WEIGHT)).saturating_add(replies.saturating_mul(REPLY_WEIGHT))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error(transparent)]
    Weights(#[from] DomainError),
    #[error("eligible post {0} is not among the candidates")]
    NotACandidate(String),
    #[error("post {0} appears more than once")]
    DuplicateUri(String),
    #[error("post {0} has score 0 and cannot be ranked")]
    ExcludedPost(String),
}

/// Per-dimension ranks of one eligible post and its aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTriple {
    pub r_relevance: usize,
    pub r_recency: usize,
    pub r_engagement: usize,
    pub borda_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub uri: String,
    pub ranks: RankTriple,
}

impl RankedEntry {
    pub fn borda_score(&self) -> f64 {
        self.ranks.borda_score
    }
}

/// Input row for [`assign_ranks`]: the value being ranked plus the fields the
/// tie-break needs.
#[derive(Debug, Clone, Copy)]
pub struct RankItem<'a, V> {
    pub uri: &'a str,
    pub created_at: DateTime<Utc>,
    pub value: V,
}

/// Newer first, then uri ascending.
fn tie_break(a_created: &DateTime<Utc>, a_uri: &str, b_created: &DateTime<Utc>, b_uri: &str) -> Ordering {
    b_created.cmp(a_created).then_with(|| a_uri.cmp(b_uri))
}

/// Sorts by value (descending when asked) with the tie-break applied inside
/// equal-value groups, then hands out positions 1..=n. No shared ranks.
pub fn assign_ranks<'a, V: Ord>(items: &[RankItem<'a, V>], descending: bool) -> HashMap<&'a str, usize> {
    let mut order: Vec<&RankItem<'a, V>> = items.iter().collect();
    order.sort_by(|a, b| {
        let by_value = if descending { b.value.cmp(&a.value) } else { a.value.cmp(&b.value) };
        by_value.then_with(|| tie_break(&a.created_at, a.uri, &b.created_at, b.uri))
    });
    order.into_iter().enumerate().map(|(i, item)| (item.uri, i + 1)).collect()
}

/// Weights rescaled to integers over their common denominator.
struct ScaledWeights {
    relevance: i128,
    popularity: i128,
    recency: i128,
    denominator: i128,
}

impl ScaledWeights {
    fn new(w: &RankingWeights) -> Self {
        let parts: [Weight; 3] = [w.relevance(), w.popularity(), w.recency()];
        let denominator = parts.iter().fold(1i128, |acc, p| acc.lcm(p.denom()));
        let scale = |p: Weight| p.numer() * (denominator / p.denom());
        Self { relevance: scale(parts[0]), popularity: scale(parts[1]), recency: scale(parts[2]), denominator }
    }

    fn aggregate(&self, relevance: usize, engagement: usize, recency: usize) -> i128 {
        self.relevance * relevance as i128 + self.popularity * engagement as i128 + self.recency * recency as i128
    }

    fn to_f64(&self, scaled: i128) -> f64 {
        scaled as f64 / self.denominator as f64
    }
}

/// Orders `eligible` by weighted Borda count.
///
/// `candidates` is the full candidate pool (eligible and excluded posts);
/// recency and engagement ranks are taken over all of it.
pub fn rank_feed(
    candidates: &[Post],
    eligible: &[CuratedPost],
    weights: &RankingWeights,
) -> Result<Vec<RankedEntry>, RankError> {
    weights.validate()?;

    let mut pool: HashSet<&str> = HashSet::with_capacity(candidates.len());
    for p in candidates {
        if !pool.insert(p.uri.as_str()) {
            return Err(RankError::DuplicateUri(p.uri.clone()));
        }
    }
    let mut seen = HashSet::with_capacity(eligible.len());
    for cp in eligible {
        let uri = cp.post.uri.as_str();
        if !pool.contains(uri) {
            return Err(RankError::NotACandidate(uri.to_string()));
        }
        if !seen.insert(uri) {
            return Err(RankError::DuplicateUri(uri.to_string()));
        }
        if cp.score() == Score::NEVER {
            return Err(RankError::ExcludedPost(uri.to_string()));
        }
    }
    if eligible.is_empty() {
        return Ok(Vec::new());
    }

    let relevance_items: Vec<_> = eligible
        .iter()
        .map(|cp| RankItem { uri: cp.post.uri.as_str(), created_at: cp.post.created_at, value: cp.score() })
        .collect();
    let recency_items: Vec<_> = candidates
        .iter()
        .map(|p| RankItem { uri: p.uri.as_str(), created_at: p.created_at, value: p.created_at })
        .collect();
    let engagement_items: Vec<_> = candidates
        .iter()
        .map(|p| RankItem { uri: p.uri.as_str(), created_at: p.created_at, value: engagement_score(p) })
        .collect();

    let relevance = assign_ranks(&relevance_items, true);
    let recency = assign_ranks(&recency_items, true);
    let engagement = assign_ranks(&engagement_items, true);

    let scaled = ScaledWeights::new(weights);
    let mut rows: Vec<(i128, &Post, RankTriple)> = eligible
        .iter()
        .map(|cp| {
            let uri = cp.post.uri.as_str();
            let (rr, rc, re) = (relevance[uri], recency[uri], engagement[uri]);
            let total = scaled.aggregate(rr, re, rc);
            let triple =
                RankTriple { r_relevance: rr, r_recency: rc, r_engagement: re, borda_score: scaled.to_f64(total) };
            (total, &cp.post, triple)
        })
        .collect();

    rows.sort_by(|(sa, pa, _), (sb, pb, _)| {
        sa.cmp(sb).then_with(|| tie_break(&pa.created_at, &pa.uri, &pb.created_at, &pb.uri))
    });

    Ok(rows.into_iter().map(|(_, post, ranks)| RankedEntry { uri: post.uri.clone(), ranks }).collect())
}

/// Packages a ranking as a served generation.
pub fn materialize(
    feed_id: &str,
    generation_id: u64,
    ranked: &[RankedEntry],
    weights: &RankingWeights,
    generated_at: DateTime<Utc>,
) -> MaterializedFeed {
    MaterializedFeed {
        feed_id: feed_id.to_string(),
        generation_id,
        entries: ranked.iter().map(|e| FeedEntry { uri: e.uri.clone(), final_score: e.ranks.borda_score }).collect(),
        generated_at,
        weights_used: weights.clone(),
    }
}

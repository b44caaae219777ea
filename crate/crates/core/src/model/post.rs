use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{DomainError, RankingWeights, Source};

/// A media attachment, passed through by reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MediaRef {
    pub media_type: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<String>,
}

/// A candidate content item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub uri: String,
    pub author: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub media: Vec<MediaRef>,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub reposts: u64,
    #[serde(default)]
    pub replies: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_via: Option<Source>,
}

/// Relevance score on the 0..=10 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Score(u8);

impl Score {
    pub const MAX: u8 = 10;
    /// Score given when nothing in the preferences applies.
    pub const UNSPECIFIED_DEFAULT: Score = Score(3);
    pub const NEVER: Score = Score(0);

    pub fn new(value: u8) -> Result<Self, DomainError> {
        if value > Self::MAX {
            return Err(DomainError::ScoreOutOfRange(i64::from(value)));
        }
        Ok(Score(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn bucket(self) -> Bucket {
        match self.0 {
            8..=10 => Bucket::StronglyPrefer,
            5..=7 => Bucket::Prefer,
            3..=4 => Bucket::Unspecified,
            1..=2 => Bucket::ShowLess,
            _ => Bucket::Never,
        }
    }
}

impl TryFrom<u8> for Score {
    type Error = DomainError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for u8 {
    fn from(s: Score) -> u8 {
        s.0
    }
}

/// Five-level preference class over the score scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    StronglyPrefer,
    Prefer,
    Unspecified,
    ShowLess,
    Never,
}

impl Bucket {
    pub const ALL: [Bucket; 5] =
        [Bucket::StronglyPrefer, Bucket::Prefer, Bucket::Unspecified, Bucket::ShowLess, Bucket::Never];

    /// Inclusive score range covered by this bucket.
    pub fn score_range(self) -> (u8, u8) {
        match self {
            Bucket::StronglyPrefer => (8, 10),
            Bucket::Prefer => (5, 7),
            Bucket::Unspecified => (3, 4),
            Bucket::ShowLess => (1, 2),
            Bucket::Never => (0, 0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::StronglyPrefer => "strongly_prefer",
            Bucket::Prefer => "prefer",
            Bucket::Unspecified => "unspecified",
            Bucket::ShowLess => "show_less",
            Bucket::Never => "never",
        }
    }
}

/// Maps a raw score to its bucket; anything outside 0..=10 is a domain error.
pub fn bucket_for_score(score: i64) -> Result<Bucket, DomainError> {
    let value = u8::try_from(score).map_err(|_| DomainError::ScoreOutOfRange(score))?;
    Ok(Score::new(value)?.bucket())
}

/// A post with its evaluation. The bucket is always derived from the score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CuratedPostWire")]
pub struct CuratedPost {
    pub post: Post,
    score: Score,
    bucket: Bucket,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Deserialize)]
struct CuratedPostWire {
    post: Post,
    score: Score,
    bucket: Bucket,
    #[serde(default)]
    rationale: Option<String>,
}

impl TryFrom<CuratedPostWire> for CuratedPost {
    type Error = DomainError;

    fn try_from(w: CuratedPostWire) -> Result<Self, Self::Error> {
        if w.score.bucket() != w.bucket {
            return Err(DomainError::BucketMismatch { score: w.score.value(), bucket: w.bucket });
        }
        Ok(CuratedPost::new(w.post, w.score, w.rationale))
    }
}

impl CuratedPost {
    pub fn new(post: Post, score: Score, rationale: Option<String>) -> Self {
        Self { post, score, bucket: score.bucket(), rationale }
    }

    pub fn score(&self) -> Score {
        self.score
    }

    pub fn bucket(&self) -> Bucket {
        self.bucket
    }

    pub fn is_excluded(&self) -> bool {
        self.score == Score::NEVER
    }
}

/// One served entry: post uri and its aggregated Borda score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub uri: String,
    pub final_score: f64,
}

/// The ordered output of one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializedFeed {
    pub feed_id: String,
    pub generation_id: u64,
    pub entries: Vec<FeedEntry>,
    pub generated_at: DateTime<Utc>,
    pub weights_used: RankingWeights,
}

impl MaterializedFeed {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks ascending scores and uri uniqueness.
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut seen = std::collections::HashSet::new();
        for pair in self.entries.windows(2) {
            if pair[0].final_score > pair[1].final_score {
                return Err(DomainError::UnsortedFeed(pair[1].uri.clone()));
            }
        }
        for e in &self.entries {
            if !seen.insert(e.uri.as_str()) {
                return Err(DomainError::DuplicateEntry(e.uri.clone()));
            }
        }
        Ok(())
    }
}

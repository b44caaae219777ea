//! Shared domain types and their validation.

mod config;
mod post;
mod weights;

pub use config::{
    validate_config, FeedConfig, Polarity, PreferencePrompt, Source, SourceKind, SourceOrigin, Strength, Violation,
    ViolationCode,
};
pub use post::{bucket_for_score, Bucket, CuratedPost, FeedEntry, MaterializedFeed, MediaRef, Post, Score};
pub use weights::{
    weight_from_f64, weights_for_style, PresetWeights, RankingStyle, RankingWeights, Weight, MAX_WEIGHT_DENOMINATOR,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("score {0} is outside 0..=10")]
    ScoreOutOfRange(i64),
    #[error("score {score} does not belong to bucket {bucket:?}")]
    BucketMismatch { score: u8, bucket: Bucket },
    #[error("weights ({0}) must each lie in [0, 1] and sum to exactly 1")]
    InvalidWeights(String),
    #[error("weight {0} has no rational form with denominator <= 1000000")]
    WeightNotRepresentable(f64),
    #[error("feed entries out of order at {0}")]
    UnsortedFeed(String),
    #[error("uri {0} appears twice in the feed")]
    DuplicateEntry(String),
}

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::RankingStyle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Feed,
    List,
    StarterPack,
    Account,
    Hashtag,
    SearchQuery,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Feed => "feed",
            SourceKind::List => "list",
            SourceKind::StarterPack => "starter_pack",
            SourceKind::Account => "account",
            SourceKind::Hashtag => "hashtag",
            SourceKind::SearchQuery => "search_query",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceOrigin {
    PlannerSuggested,
    UserAdded,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub identifier: String,
    #[serde(default)]
    pub display_title: String,
    pub origin: SourceOrigin,
}

impl Source {
    /// Builds a source, stripping a leading `#` from hashtags.
    pub fn new(
        kind: SourceKind,
        identifier: impl Into<String>,
        display_title: impl Into<String>,
        origin: SourceOrigin,
    ) -> Self {
        let mut s = Self { kind, identifier: identifier.into(), display_title: display_title.into(), origin };
        s.normalize();
        s
    }

    pub fn normalize(&mut self) {
        let trimmed = self.identifier.trim();
        let trimmed = if self.kind == SourceKind::Hashtag { trimmed.trim_start_matches('#') } else { trimmed };
        if trimmed.len() != self.identifier.len() {
            self.identifier = trimmed.to_string();
        }
    }

    /// Identity used for deduplication.
    pub fn key(&self) -> (SourceKind, &str) {
        (self.kind, self.identifier.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Include,
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    StronglyPreferred,
    Preferred,
    NeverShown,
    ShownLessOften,
}

impl Strength {
    /// The only polarity this strength is legal for.
    pub fn polarity(self) -> Polarity {
        match self {
            Strength::StronglyPreferred | Strength::Preferred => Polarity::Include,
            Strength::NeverShown | Strength::ShownLessOften => Polarity::Limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreferencePrompt {
    pub prompt_id: String,
    pub text: String,
    pub polarity: Polarity,
    pub strength: Strength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedConfig {
    pub feed_id: String,
    pub owner: String,
    pub description: String,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub include_prompts: Vec<PreferencePrompt>,
    #[serde(default)]
    pub limit_prompts: Vec<PreferencePrompt>,
    #[serde(default)]
    pub ranking: RankingStyle,
    #[serde(default)]
    pub active: bool,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl FeedConfig {
    pub fn prompts(&self) -> impl Iterator<Item = &PreferencePrompt> {
        self.include_prompts.iter().chain(&self.limit_prompts)
    }

    pub fn normalize(&mut self) {
        for s in &mut self.sources {
            s.normalize();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyDescription,
    EmptyPromptText,
    EmptyPromptId,
    DuplicatePromptId,
    IllegalStrength,
    WrongPromptList,
    EmptySourceIdentifier,
    HashtagPrefix,
    DuplicateSource,
    InvalidWeights,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code, path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.code, self.path, self.message)
    }
}

/// Lists every invariant the config breaks. An empty list means valid.
pub fn validate_config(config: &FeedConfig) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    if config.description.trim().is_empty() {
        out.push(Violation::new(EmptyDescription, "description", "description is empty"));
    }

    let mut ids = HashSet::new();
    let lists = [
        ("include_prompts", Polarity::Include, &config.include_prompts),
        ("limit_prompts", Polarity::Limit, &config.limit_prompts),
    ];
    for (list_name, expected, prompts) in lists {
        for (i, p) in prompts.iter().enumerate() {
            let path = format!("{list_name}[{i}]");
            if p.text.trim().is_empty() {
                out.push(Violation::new(EmptyPromptText, &path, "prompt text is empty"));
            }
            if p.prompt_id.trim().is_empty() {
                out.push(Violation::new(EmptyPromptId, &path, "prompt id is empty"));
            } else if !ids.insert(p.prompt_id.as_str()) {
                out.push(Violation::new(
                    DuplicatePromptId,
                    &path,
                    format!("prompt id {:?} is used more than once", p.prompt_id),
                ));
            }
            if p.strength.polarity() != p.polarity {
                out.push(Violation::new(
                    IllegalStrength,
                    &path,
                    format!("strength {:?} is not allowed for polarity {:?}", p.strength, p.polarity),
                ));
            } else if p.polarity != expected {
                out.push(Violation::new(
                    WrongPromptList,
                    &path,
                    format!("{:?} prompt listed under {list_name}", p.polarity),
                ));
            }
        }
    }

    let mut keys = HashSet::new();
    for (i, s) in config.sources.iter().enumerate() {
        let path = format!("sources[{i}]");
        if s.identifier.trim().is_empty() {
            out.push(Violation::new(EmptySourceIdentifier, &path, "source identifier is empty"));
        }
        if s.kind == SourceKind::Hashtag && s.identifier.starts_with('#') {
            out.push(Violation::new(HashtagPrefix, &path, "hashtag stored with leading '#'"));
        }
        if !keys.insert(s.key()) {
            out.push(Violation::new(DuplicateSource, &path, format!("duplicate source {} {:?}", s.kind, s.identifier)));
        }
    }

    if let RankingStyle::Custom(w) = &config.ranking {
        if let Err(e) = w.validate() {
            out.push(Violation::new(InvalidWeights, "ranking", e.to_string()));
        }
    }

    out
}

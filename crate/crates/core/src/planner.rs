//! Turns a natural-language description into a draft feed configuration.

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde_json::json;

use crate::catalog::Catalog;
use crate::lm::schema::{PlanOutput, PromptSpec, SourceRef, SuggestInput, SuggestOutput};
use crate::lm::{LmClient, LmError, LmRequest, LmTask};
use crate::model::{
    validate_config, FeedConfig, Polarity, PreferencePrompt, RankingStyle, Source, SourceKind, SourceOrigin, Violation,
};

pub const MAX_SUGGESTED_SOURCES: usize = 12;
pub const MAX_PROMPTS_PER_POLARITY: usize = 8;
/// Catalog matches attached per search term.
pub const CATALOG_HITS_PER_TERM: usize = 3;
pub const DRAFT_FEED_ID: &str = "draft";

const PLAN_SYSTEM_PROMPT: &str = "\
You help people build a social media feed from a plain-language description of what they want to see.
Read the description in the user message and reply with one JSON object with these fields:
  search_terms: short topic words to look up in a directory of existing feeds, lists and starter packs;
  search_queries: full-text post search queries that would find matching posts;
  hashtags: hashtags without the leading '#';
  accounts: account handles that post this kind of content;
  include_prompts: [{text, strength}] where strength is \"strongly_preferred\" or \"preferred\";
  limit_prompts: [{text, strength}] where strength is \"never_shown\" or \"shown_less_often\".
Write each prompt as a short phrase such as \"posts about birds\". Use empty lists where nothing applies.";

const SUGGEST_SYSTEM_PROMPT: &str = "\
You suggest additional content sources for a social media feed.
The user message lists the feed description, its include preferences and the sources it already has.
Reply with one JSON object {\"sources\": [{kind, identifier, display_title}]} where kind is one of
\"search_query\", \"hashtag\" or \"account\". Do not repeat existing sources.";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("description is empty")]
    EmptyDescription,
    #[error("PLAN_FAILED: {0}")]
    Failed(LmError),
    #[error("planner produced an invalid draft: {0:?}")]
    InvalidDraft(Vec<Violation>),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::EmptyDescription => "EMPTY_DESCRIPTION",
            PlanError::Failed(_) => "PLAN_FAILED",
            PlanError::InvalidDraft(_) => "INVALID_DRAFT",
        }
    }
}

#[derive(Clone)]
pub struct Planner {
    catalog: std::sync::Arc<Catalog>,
    lm: LmClient,
}

impl Planner {
    pub fn new(catalog: std::sync::Arc<Catalog>, lm: LmClient) -> Self {
        Self { catalog, lm }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn plan_request(description: &str) -> LmRequest {
        LmRequest::new(LmTask::Plan, PLAN_SYSTEM_PROMPT, json!({ "description": description.trim() }))
    }

    /// Produces an unsaved draft. Ranking defaults to balanced and the draft
    /// is never active.
    pub async fn plan(&self, description: &str, owner: &str, now: DateTime<Utc>) -> Result<FeedConfig, PlanError> {
        if description.trim().is_empty() {
            return Err(PlanError::EmptyDescription);
        }
        let response = self.lm.complete(&Self::plan_request(description)).await.map_err(PlanError::Failed)?;
        let plan: PlanOutput = serde_json::from_value(response.content)
            .map_err(|e| PlanError::Failed(LmError::SchemaViolation(e.to_string())))?;

        let mut sources = SourceSet::new(MAX_SUGGESTED_SOURCES);
        for term in &plan.search_terms {
            if term.trim().is_empty() {
                continue;
            }
            let hits = self.catalog.search(term, None, CATALOG_HITS_PER_TERM).unwrap_or_default();
            for hit in hits {
                sources.push(Source::new(hit.kind.into(), hit.uri, hit.title, SourceOrigin::PlannerSuggested));
            }
        }
        for q in &plan.search_queries {
            sources.push(Source::new(
                SourceKind::SearchQuery,
                q.trim(),
                format!("Search: {}", q.trim()),
                SourceOrigin::PlannerSuggested,
            ));
        }
        for tag in &plan.hashtags {
            let tag = tag.trim().trim_start_matches('#');
            sources.push(Source::new(SourceKind::Hashtag, tag, format!("#{tag}"), SourceOrigin::PlannerSuggested));
        }
        for account in &plan.accounts {
            sources.push(Source::new(
                SourceKind::Account,
                account.trim(),
                account.trim(),
                SourceOrigin::PlannerSuggested,
            ));
        }

        let draft = FeedConfig {
            feed_id: DRAFT_FEED_ID.to_string(),
            owner: owner.to_string(),
            description: description.trim().to_string(),
            sources: sources.into_vec(),
            include_prompts: to_prompts(&plan.include_prompts, Polarity::Include, "include"),
            limit_prompts: to_prompts(&plan.limit_prompts, Polarity::Limit, "limit"),
            ranking: RankingStyle::Balanced,
            active: false,
            created_at: now,
            updated_at: now,
        };
        let violations = validate_config(&draft);
        if !violations.is_empty() {
            return Err(PlanError::InvalidDraft(violations));
        }
        Ok(draft)
    }

    /// Best effort: provider failures yield an empty list.
    pub async fn suggest_additional_sources(&self, config: &FeedConfig) -> Vec<Source> {
        let input = SuggestInput {
            description: config.description.clone(),
            include_prompts: config
                .include_prompts
                .iter()
                .map(|p| PromptSpec { text: p.text.clone(), strength: p.strength })
                .collect(),
            existing_sources: config
                .sources
                .iter()
                .map(|s| SourceRef { kind: s.kind, identifier: s.identifier.clone() })
                .collect(),
        };
        let request = LmRequest::new(
            LmTask::SuggestSources,
            SUGGEST_SYSTEM_PROMPT,
            serde_json::to_value(&input).expect("suggest input serializes"),
        );
        let out: SuggestOutput = match self.lm.complete(&request).await {
            Ok(resp) => match serde_json::from_value(resp.content) {
                Ok(out) => out,
                Err(e) => {
                    tracing::warn!(error = %e, "unusable source suggestions");
                    return Vec::new();
                }
            },
            Err(e) => {
                tracing::warn!(error = %e, "source suggestion failed");
                return Vec::new();
            }
        };

        let existing: HashSet<(SourceKind, String)> =
            config.sources.iter().map(|s| (s.kind, s.identifier.clone())).collect();
        let mut suggestions = SourceSet::new(MAX_SUGGESTED_SOURCES);
        for s in out.sources {
            let source = Source::new(s.kind, s.identifier, s.display_title, SourceOrigin::PlannerSuggested);
            if !existing.contains(&(source.kind, source.identifier.clone())) {
                suggestions.push(source);
            }
        }
        suggestions.into_vec()
    }
}

fn to_prompts(specs: &[PromptSpec], polarity: Polarity, prefix: &str) -> Vec<PreferencePrompt> {
    let mut seen = HashSet::new();
    specs
        .iter()
        .filter(|s| !s.text.trim().is_empty() && s.strength.polarity() == polarity)
        .filter(|s| seen.insert(s.text.trim().to_lowercase()))
        .take(MAX_PROMPTS_PER_POLARITY)
        .enumerate()
        .map(|(i, s)| PreferencePrompt {
            prompt_id: format!("{prefix}-{}", i + 1),
            text: s.text.trim().to_string(),
            polarity,
            strength: s.strength,
        })
        .collect()
}

/// Ordered, deduplicated, capped list of sources.
struct SourceSet {
    cap: usize,
    keys: HashSet<(SourceKind, String)>,
    items: Vec<Source>,
}

impl SourceSet {
    fn new(cap: usize) -> Self {
        Self { cap, keys: HashSet::new(), items: Vec::new() }
    }

    fn push(&mut self, source: Source) {
        if self.items.len() >= self.cap || source.identifier.is_empty() {
            return;
        }
        if self.keys.insert((source.kind, source.identifier.clone())) {
            self.items.push(source);
        }
    }

    fn into_vec(self) -> Vec<Source> {
        self.items
    }
}

//! Scores candidate posts against a config's preference prompts.

use std::collections::{BTreeMap, HashMap};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lm::schema::{CurateInput, CurateOutput, MediaView, PostView, PromptSpec};
use crate::lm::{LmClient, LmRequest, LmTask};
use crate::model::{Bucket, CuratedPost, FeedConfig, Post, Score};

pub const EVALUATION_FAILED: &str = "evaluation_failed";

const CURATE_SYSTEM_PROMPT: &str = "\
You curate a personal social media feed. Score the post in the user message against the feed's preferences
on a 0-10 scale:
  8-10 strongly prefer: matches a \"strongly_preferred\" include preference;
  5-7  prefer: matches a \"preferred\" include preference;
  3-4  unspecified: no preference applies (use default_score_range);
  1-2  show less often: matches a \"shown_less_often\" limit preference;
  0    never show: matches a \"never_shown\" limit preference. This overrides every include preference.
When a post matches both include and limit preferences, weigh their strengths, except that never_shown
always yields 0. Images are described by their media type and alt text.
Reply with one JSON object {\"include\": bool, \"score\": integer, \"rationale\": short string};
include must be false exactly when score is 0.";

const NO_PREFERENCES_NOTE: &str =
    "\nThis feed states no preferences, so every post gets a score inside default_score_range.";

/// Builds the curate request. Identical inputs give identical bytes.
pub fn build_curation_prompt(post: &Post, config: &FeedConfig) -> LmRequest {
    let to_spec = |p: &crate::model::PreferencePrompt| PromptSpec { text: p.text.clone(), strength: p.strength };
    let input = CurateInput {
        post: PostView {
            uri: post.uri.clone(),
            text: post.text.clone(),
            media: post
                .media
                .iter()
                .map(|m| MediaView { media_type: m.media_type.clone(), url: m.url.clone(), alt: m.alt.clone() })
                .collect(),
        },
        include_prompts: config.include_prompts.iter().map(to_spec).collect(),
        limit_prompts: config.limit_prompts.iter().map(to_spec).collect(),
        default_score_range: [3, 4],
    };
    let mut system = CURATE_SYSTEM_PROMPT.to_string();
    if config.include_prompts.is_empty() && config.limit_prompts.is_empty() {
        system.push_str(NO_PREFERENCES_NOTE);
    }
    LmRequest::new(LmTask::Curate, system, serde_json::to_value(input).expect("curate input serializes"))
}

/// Hash of everything in a config that the curation request depends on.
pub fn config_content_hash(config: &FeedConfig) -> String {
    #[derive(Serialize)]
    struct Relevant<'a> {
        description: &'a str,
        include_prompts: &'a [crate::model::PreferencePrompt],
        limit_prompts: &'a [crate::model::PreferencePrompt],
    }
    let bytes = serde_json::to_vec(&Relevant {
        description: &config.description,
        include_prompts: &config.include_prompts,
        limit_prompts: &config.limit_prompts,
    })
    .expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedEvaluation {
    pub score: Score,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// Evaluations for one config version, keyed by post uri. Switching to a
/// different config hash discards everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationCache {
    pub config_hash: String,
    pub entries: BTreeMap<String, CachedEvaluation>,
}

impl CurationCache {
    pub fn align_to(&mut self, config_hash: &str) {
        if self.config_hash != config_hash {
            self.config_hash = config_hash.to_string();
            self.entries.clear();
        }
    }

    pub fn retain_uris(&mut self, keep: impl Fn(&str) -> bool) {
        self.entries.retain(|uri, _| keep(uri));
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationReport {
    pub buckets: BTreeMap<Bucket, usize>,
    /// Posts sent to the evaluator in this run.
    pub evaluated: usize,
    pub cache_hits: usize,
    pub failures: usize,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutcome {
    pub eligible: Vec<CuratedPost>,
    pub excluded: Vec<CuratedPost>,
    pub report: CurationReport,
}

#[derive(Clone, Debug)]
pub struct Curator {
    lm: LmClient,
}

impl Curator {
    pub fn new(lm: LmClient) -> Self {
        Self { lm }
    }

    pub async fn curate(&self, posts: &[Post], config: &FeedConfig) -> CurationOutcome {
        let mut scratch = CurationCache::default();
        self.curate_cached(posts, config, &mut scratch).await
    }

    /// Curates `posts`, reusing and extending `cache`. Failed evaluations
    /// are scored as unspecified and not cached.
    pub async fn curate_cached(
        &self,
        posts: &[Post],
        config: &FeedConfig,
        cache: &mut CurationCache,
    ) -> CurationOutcome {
        cache.align_to(&config_content_hash(config));

        let pending: Vec<&Post> = posts.iter().filter(|p| !cache.entries.contains_key(&p.uri)).collect();
        let jobs: Vec<_> = pending
            .into_iter()
            .map(|post| async move { (post.uri.clone(), self.evaluate(post, config).await) })
            .collect();
        let fresh: HashMap<String, Option<CachedEvaluation>> =
            stream::iter(jobs).buffered(self.lm.settings().max_in_flight.max(1)).collect().await;

        let mut report = CurationReport { evaluated: fresh.len(), ..CurationReport::default() };
        report.cache_hits = posts.len() - fresh.len().min(posts.len());
        let mut eligible = Vec::new();
        let mut excluded = Vec::new();
        for post in posts {
            let evaluation = match fresh.get(&post.uri) {
                Some(Some(eval)) => {
                    cache.entries.insert(post.uri.clone(), eval.clone());
                    eval.clone()
                }
                Some(None) => {
                    report.failures += 1;
                    CachedEvaluation { score: Score::UNSPECIFIED_DEFAULT, rationale: Some(EVALUATION_FAILED.into()) }
                }
                None => cache.entries[&post.uri].clone(),
            };
            let curated = CuratedPost::new(post.clone(), evaluation.score, evaluation.rationale);
            *report.buckets.entry(curated.bucket()).or_default() += 1;
            if curated.is_excluded() {
                excluded.push(curated);
            } else {
                eligible.push(curated);
            }
        }
        report.degraded = report.evaluated > 0 && report.failures * 2 > report.evaluated;
        if report.degraded {
            tracing::warn!(failures = report.failures, evaluated = report.evaluated, "CURATION_DEGRADED");
        }
        CurationOutcome { eligible, excluded, report }
    }

    async fn evaluate(&self, post: &Post, config: &FeedConfig) -> Option<CachedEvaluation> {
        let request = build_curation_prompt(post, config);
        let response = match self.lm.complete(&request).await {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(uri = %post.uri, error = %e, "post evaluation failed");
                return None;
            }
        };
        let out: CurateOutput = serde_json::from_value(response.content).ok()?;
        let score = Score::new(out.score).ok()?;
        Some(CachedEvaluation { score, rationale: out.rationale })
    }
}

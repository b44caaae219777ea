//! Deterministic rule-table backend used by tests and offline runs.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::schema::{
    CurateInput, CurateOutput, PlanInput, PlanOutput, PromptSpec, SuggestInput, SuggestOutput, SuggestedSource,
};
use super::{BackendError, BackendReply, LmBackend, LmRequest, LmTask};
use crate::model::{Score, SourceKind, Strength};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurateRule {
    pub keyword: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSource {
    pub kind: SourceKind,
    pub identifier: String,
    #[serde(default)]
    pub display_title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRule {
    pub keyword: String,
    #[serde(default)]
    pub sources: Vec<RuleSource>,
    /// Catalog lookups to request when the keyword appears.
    #[serde(default)]
    pub search_terms: Vec<String>,
}

/// Keyword rules driving the mock. Keywords are matched case-insensitively
/// as substrings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRules {
    #[serde(default)]
    pub curate: Vec<CurateRule>,
    #[serde(default)]
    pub plan: Vec<PlanRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum MockRulesError {
    #[error("cannot read mock rules {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("mock rules are not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("curate rule {keyword:?} has score {score} outside 0..=10")]
    ScoreOutOfRange { keyword: String, score: u8 },
    #[error("rule keyword at position {0} is empty")]
    EmptyKeyword(usize),
}

impl MockRules {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MockRulesError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| MockRulesError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Parses a rule file. Blank input yields an empty table. A keyword that
    /// appears twice keeps its last definition.
    pub fn from_json(text: &str) -> Result<Self, MockRulesError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let raw: MockRules = serde_json::from_str(text)?;
        let mut rules = MockRules::default();
        for (i, rule) in raw.curate.into_iter().enumerate() {
            if rule.keyword.trim().is_empty() {
                return Err(MockRulesError::EmptyKeyword(i));
            }
            if rule.score > Score::MAX {
                return Err(MockRulesError::ScoreOutOfRange { keyword: rule.keyword, score: rule.score });
            }
            upsert(&mut rules.curate, rule, |r| &r.keyword, "curate");
        }
        for (i, rule) in raw.plan.into_iter().enumerate() {
            if rule.keyword.trim().is_empty() {
                return Err(MockRulesError::EmptyKeyword(i));
            }
            upsert(&mut rules.plan, rule, |r| &r.keyword, "plan");
        }
        Ok(rules)
    }
}

fn upsert<T>(list: &mut Vec<T>, item: T, key: impl Fn(&T) -> &String, table: &str) {
    let k = key(&item).to_lowercase();
    if let Some(slot) = list.iter_mut().find(|existing| key(existing).to_lowercase() == k) {
        tracing::warn!(table, keyword = %k, "duplicate mock rule keyword, last definition wins");
        *slot = item;
    } else {
        list.push(item);
    }
}

/// Injected misbehaviour for failure-path tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Every call fails as if the endpoint refused the connection.
    Unreachable,
    /// Calls never return.
    Hang,
    /// Calls return text that is not JSON.
    Garbage,
    /// Curate calls for posts whose text contains this marker fail.
    FailCurateContaining(String),
}

#[derive(Debug, Default)]
pub struct MockBackend {
    rules: MockRules,
    fault: Option<Fault>,
    latency: Option<Duration>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(rules: MockRules) -> Self {
        Self { rules, ..Self::default() }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn rules(&self) -> &MockRules {
        &self.rules
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    /// Pure evaluation of a request against the rule table.
    pub fn respond(&self, request: &LmRequest) -> Result<Value, BackendError> {
        let bad = |e: serde_json::Error| BackendError::Fatal(format!("mock cannot read payload: {e}"));
        let value = match request.task {
            LmTask::Curate => {
                let input: CurateInput = serde_json::from_value(request.user_payload.clone()).map_err(bad)?;
                serde_json::to_value(self.curate(&input))
            }
            LmTask::Plan => {
                let input: PlanInput = serde_json::from_value(request.user_payload.clone()).map_err(bad)?;
                serde_json::to_value(self.plan(&input))
            }
            LmTask::SuggestSources => {
                let input: SuggestInput = serde_json::from_value(request.user_payload.clone()).map_err(bad)?;
                serde_json::to_value(self.suggest(&input))
            }
        };
        value.map_err(|e| BackendError::Fatal(e.to_string()))
    }

    /// Score 0 from any matching rule wins outright; otherwise the highest
    /// matching score; otherwise the unspecified default.
    fn curate(&self, input: &CurateInput) -> CurateOutput {
        let mut haystack = input.post.text.to_lowercase();
        for m in &input.post.media {
            if let Some(alt) = &m.alt {
                haystack.push('\n');
                haystack.push_str(&alt.to_lowercase());
            }
        }
        let matched: Vec<u8> = self
            .rules
            .curate
            .iter()
            .filter(|r| haystack.contains(&r.keyword.to_lowercase()))
            .map(|r| r.score)
            .collect();
        let score = if matched.contains(&0) {
            0
        } else {
            matched.into_iter().max().unwrap_or(Score::UNSPECIFIED_DEFAULT.value())
        };
        CurateOutput { include: score > 0, score, rationale: None }
    }

    fn plan(&self, input: &PlanInput) -> PlanOutput {
        let description = input.description.trim();
        let lowered = description.to_lowercase();
        let mut out = PlanOutput::default();

        for clause in split_clauses(&lowered) {
            let (negated, strength, topic) = match strip_negation(clause) {
                Some((strength, topic)) => (true, strength, topic),
                None => (false, Strength::Preferred, clause),
            };
            let words = content_words(topic);
            if words.is_empty() {
                continue;
            }
            let topic = topic.trim();
            let text = format!("posts about {topic}");
            if negated {
                out.limit_prompts.push(PromptSpec { text, strength });
            } else {
                let strength =
                    if out.include_prompts.is_empty() { Strength::StronglyPreferred } else { Strength::Preferred };
                out.include_prompts.push(PromptSpec { text, strength });
                push_unique(&mut out.search_queries, words.join(" "));
            }
        }
        if out.include_prompts.is_empty() {
            out.include_prompts.push(PromptSpec { text: description.to_string(), strength: Strength::Preferred });
        }
        if out.search_queries.is_empty() {
            out.search_queries.push(description.to_string());
        }

        for rule in &self.rules.plan {
            if !lowered.contains(&rule.keyword.to_lowercase()) {
                continue;
            }
            for term in &rule.search_terms {
                push_unique(&mut out.search_terms, term.clone());
            }
            for s in &rule.sources {
                match s.kind {
                    SourceKind::Hashtag => push_unique(&mut out.hashtags, s.identifier.clone()),
                    SourceKind::Account => push_unique(&mut out.accounts, s.identifier.clone()),
                    SourceKind::SearchQuery => push_unique(&mut out.search_queries, s.identifier.clone()),
                    SourceKind::Feed | SourceKind::List | SourceKind::StarterPack => {}
                }
            }
        }
        out
    }

    fn suggest(&self, input: &SuggestInput) -> SuggestOutput {
        let existing: Vec<(SourceKind, &str)> =
            input.existing_sources.iter().map(|s| (s.kind, s.identifier.as_str())).collect();
        let mut sources: Vec<SuggestedSource> = Vec::new();
        let mut push = |s: SuggestedSource| {
            let dup = existing.contains(&(s.kind, s.identifier.as_str()))
                || sources.iter().any(|o| o.kind == s.kind && o.identifier == s.identifier);
            if !dup {
                sources.push(s);
            }
        };
        for prompt in &input.include_prompts {
            let lowered = prompt.text.to_lowercase();
            let topic = strip_lead_in(lowered.trim());
            if !content_words(topic).is_empty() {
                push(SuggestedSource {
                    kind: SourceKind::SearchQuery,
                    identifier: topic.to_string(),
                    display_title: format!("Search: {topic}"),
                });
            }
            for rule in &self.rules.plan {
                if lowered.contains(&rule.keyword.to_lowercase()) {
                    for s in &rule.sources {
                        push(SuggestedSource {
                            kind: s.kind,
                            identifier: s.identifier.clone(),
                            display_title: s.display_title.clone(),
                        });
                    }
                }
            }
        }
        SuggestOutput { sources }
    }
}

#[async_trait]
impl LmBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    async fn call(&self, request: &LmRequest) -> Result<BackendReply, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let result = self.call_inner(request).await;
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

impl MockBackend {
    async fn call_inner(&self, request: &LmRequest) -> Result<BackendReply, BackendError> {
        if let Some(latency) = self.latency {
            tokio::time::sleep(latency).await;
        }
        match &self.fault {
            Some(Fault::Unreachable) => return Err(BackendError::Transient("connection refused (mock)".into())),
            Some(Fault::Hang) => std::future::pending::<()>().await,
            Some(Fault::Garbage) => return Ok(BackendReply { text: "<<garbage>>".into(), meta: json!({}) }),
            Some(Fault::FailCurateContaining(marker)) if request.task == LmTask::Curate => {
                let text = request.user_payload["post"]["text"].as_str().unwrap_or_default();
                if text.contains(marker.as_str()) {
                    return Err(BackendError::Fatal("mock evaluation failure".into()));
                }
            }
            _ => {}
        }
        let content = self.respond(request)?;
        Ok(BackendReply { text: content.to_string(), meta: json!({"backend": "mock"}) })
    }
}

const STOP_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can",
    "do", "does", "feed", "for", "from", "get", "give", "have", "i", "i'd", "i'm", "in", "into", "is", "it", "its",
    "just", "like", "lot", "lots", "me", "more", "my", "of", "on", "only", "or", "other", "our", "please", "posts",
    "see", "show", "so", "some", "stuff", "that", "the", "their", "them", "there", "these", "things", "this", "those",
    "to", "too", "up", "us", "want", "was", "we", "what", "when", "where", "which", "who", "with", "would", "you",
    "your",
];

const NEGATIONS: &[(&str, Strength)] = &[
    ("less ", Strength::ShownLessOften),
    ("fewer ", Strength::ShownLessOften),
    ("not much ", Strength::ShownLessOften),
    ("no ", Strength::NeverShown),
    ("not ", Strength::NeverShown),
    ("without ", Strength::NeverShown),
    ("never ", Strength::NeverShown),
    ("avoid ", Strength::NeverShown),
    ("nothing about ", Strength::NeverShown),
    ("don't show ", Strength::NeverShown),
    ("dont show ", Strength::NeverShown),
];

fn split_clauses(text: &str) -> Vec<&str> {
    text.split([',', ';', '.', '!', '?', '\n'])
        .flat_map(|c| c.split(" but "))
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect()
}

fn strip_negation(clause: &str) -> Option<(Strength, &str)> {
    let clause = clause.trim_start_matches("and ").trim_start();
    NEGATIONS.iter().find_map(|(prefix, strength)| clause.strip_prefix(prefix).map(|rest| (*strength, rest)))
}

fn strip_lead_in(text: &str) -> &str {
    for lead in ["posts about ", "content about ", "posts on ", "about "] {
        if let Some(rest) = text.strip_prefix(lead) {
            return rest.trim();
        }
    }
    text
}

fn content_words(text: &str) -> Vec<&str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-'))
        .filter(|w| !w.is_empty() && !STOP_WORDS.contains(w))
        .collect()
}

fn push_unique(list: &mut Vec<String>, item: String) {
    if !list.contains(&item) {
        list.push(item);
    }
}

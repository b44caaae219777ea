//! Per-task input and output documents exchanged with the model.
//!
//! Validation is done by deserializing into these types and then checking
//! the constraints serde cannot express.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use super::LmTask;
use crate::model::{Polarity, SourceKind, Strength};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub text: String,
    pub strength: Strength,
}

// ---- plan -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanInput {
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOutput {
    /// Terms looked up in the source catalog.
    #[serde(default)]
    pub search_terms: Vec<String>,
    /// Queries attached directly as `search_query` sources.
    #[serde(default)]
    pub search_queries: Vec<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub accounts: Vec<String>,
    #[serde(default)]
    pub include_prompts: Vec<PromptSpec>,
    #[serde(default)]
    pub limit_prompts: Vec<PromptSpec>,
}

// ---- suggest_sources --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub kind: SourceKind,
    pub identifier: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestInput {
    pub description: String,
    pub include_prompts: Vec<PromptSpec>,
    pub existing_sources: Vec<SourceRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestedSource {
    pub kind: SourceKind,
    pub identifier: String,
    #[serde(default)]
    pub display_title: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestOutput {
    #[serde(default)]
    pub sources: Vec<SuggestedSource>,
}

// ---- curate -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaView {
    pub media_type: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostView {
    pub uri: String,
    pub text: String,
    pub media: Vec<MediaView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurateInput {
    pub post: PostView,
    pub include_prompts: Vec<PromptSpec>,
    pub limit_prompts: Vec<PromptSpec>,
    /// Inclusive score range to use when no preference applies.
    pub default_score_range: [u8; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurateOutput {
    pub include: bool,
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

fn parse<T: DeserializeOwned>(value: &Value) -> Result<T, String> {
    T::deserialize(value).map_err(|e| e.to_string())
}

fn check_prompts(prompts: &[PromptSpec], polarity: Polarity, field: &str) -> Result<(), String> {
    for (i, p) in prompts.iter().enumerate() {
        if p.text.trim().is_empty() {
            return Err(format!("{field}[{i}].text is empty"));
        }
        if p.strength.polarity() != polarity {
            return Err(format!("{field}[{i}].strength {:?} not allowed here", p.strength));
        }
    }
    Ok(())
}

/// Checks a request payload before it is sent anywhere.
pub fn validate_input(task: LmTask, payload: &Value) -> Result<(), String> {
    match task {
        LmTask::Plan => {
            let input: PlanInput = parse(payload)?;
            if input.description.trim().is_empty() {
                return Err("description is empty".into());
            }
        }
        LmTask::SuggestSources => {
            let input: SuggestInput = parse(payload)?;
            check_prompts(&input.include_prompts, Polarity::Include, "include_prompts")?;
        }
        LmTask::Curate => {
            let input: CurateInput = parse(payload)?;
            check_prompts(&input.include_prompts, Polarity::Include, "include_prompts")?;
            check_prompts(&input.limit_prompts, Polarity::Limit, "limit_prompts")?;
            let [lo, hi] = input.default_score_range;
            if lo > hi || hi > 10 {
                return Err("default_score_range must be an ordered pair within 0..=10".into());
            }
        }
    }
    Ok(())
}

/// Checks a model reply against the task's output schema and returns it in
/// canonical form.
pub fn validate_output(task: LmTask, content: &Value) -> Result<Value, String> {
    let canonical = match task {
        LmTask::Plan => {
            let out: PlanOutput = parse(content)?;
            check_prompts(&out.include_prompts, Polarity::Include, "include_prompts")?;
            check_prompts(&out.limit_prompts, Polarity::Limit, "limit_prompts")?;
            serde_json::to_value(out)
        }
        LmTask::SuggestSources => {
            let out: SuggestOutput = parse(content)?;
            if let Some(i) = out.sources.iter().position(|s| s.identifier.trim().is_empty()) {
                return Err(format!("sources[{i}].identifier is empty"));
            }
            serde_json::to_value(out)
        }
        LmTask::Curate => {
            let out: CurateOutput = parse(content)?;
            if out.score > 10 {
                return Err(format!("score {} outside 0..=10", out.score));
            }
            if out.include != (out.score > 0) {
                return Err(format!("include={} inconsistent with score {}", out.include, out.score));
            }
            serde_json::to_value(out)
        }
    };
    canonical.map_err(|e| e.to_string())
}

//! `plan` and `run`: the pipeline over local files, no service involved.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use bonsai_core::catalog::Catalog;
use bonsai_core::curator::Curator;
use bonsai_core::lm::{HttpBackend, LmClient, LmSettings, MockBackend, MockRules, RemoteProviderConfig};
use bonsai_core::pipeline::{Pipeline, PipelineError, PipelineRun, PoolState};
use bonsai_core::planner::{PlanError, Planner};
use bonsai_core::sourcer::{FixtureAdapter, Sourcer, SourcerSettings};
use bonsai_core::{weights_for_style, FeedConfig, PresetWeights, RankingStyle};
use chrono::Utc;
use serde::Serialize;
use serde_json::json;

use crate::{CliError, LmArgs, PlanArgs, RunArgs};

fn lm_client(args: &LmArgs) -> Result<LmClient, CliError> {
    let settings =
        LmSettings { max_retries: args.lm_max_retries, timeout_ms: args.lm_timeout_ms, ..LmSettings::default() };
    if let Some(base_url) = &args.lm_base_url {
        let remote = RemoteProviderConfig {
            base_url: base_url.clone(),
            model: args.lm_model.clone(),
            api_key_env: "BONSAI_LM_API_KEY".into(),
        };
        let backend = HttpBackend::new(&remote).map_err(|e| CliError::Provider(e.to_string()))?;
        return Ok(LmClient::new(Arc::new(backend), settings));
    }
    let rules = match &args.mock_rules {
        Some(path) => MockRules::load(path).map_err(|e| CliError::Invalid(e.to_string()))?,
        None => MockRules::default(),
    };
    Ok(LmClient::new(Arc::new(MockBackend::new(rules)), settings))
}

/// Prints the drafted config as pretty JSON.
pub async fn plan(args: &PlanArgs) -> Result<String, CliError> {
    let catalog = match &args.catalog {
        Some(path) => Catalog::ingest(path).map_err(|e| CliError::Invalid(e.to_string()))?.0,
        None => Catalog::empty(),
    };
    let planner = Planner::new(Arc::new(catalog), lm_client(&args.lm)?);
    let now = args.now.unwrap_or_else(Utc::now);
    let draft = planner.plan(&args.description, &args.owner, now).await.map_err(|e| match e {
        PlanError::EmptyDescription => CliError::Invalid(e.to_string()),
        PlanError::Failed(_) | PlanError::InvalidDraft(_) => CliError::Provider(e.to_string()),
    })?;
    let mut out = serde_json::to_string_pretty(&draft).expect("config serializes");
    out.push('\n');
    Ok(out)
}

fn read_config(path: &Path) -> Result<FeedConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Runs sourcing, curation and ranking once over the corpus and renders the
/// ranked feed with its stage counts.
pub async fn run(args: &RunArgs) -> Result<String, CliError> {
    let config = read_config(&args.config)?;
    let presets = PresetWeights::default();
    let style = match &args.weights {
        Some(text) => RankingStyle::parse(text).map_err(|e| CliError::Invalid(format!("--weights: {e}")))?,
        None => config.ranking.clone(),
    };
    let weights = weights_for_style(&style, &presets).map_err(|e| CliError::Invalid(format!("weights: {e}")))?;

    let adapter = FixtureAdapter::load(&args.corpus).map_err(|e| CliError::Invalid(e.to_string()))?;
    let now = match args.now.or_else(|| adapter.newest_post_at()) {
        Some(t) => t,
        None => Utc::now(),
    };
    let sourcer = Sourcer::new(Arc::new(adapter), SourcerSettings::default());
    let pipeline = Pipeline::new(sourcer, Curator::new(lm_client(&args.lm)?), presets);
    let (outcome, _) =
        pipeline.generate(&config, &PoolState::default(), Some(&weights), now).await.map_err(|e| match e {
            PipelineError::InvalidConfig(v) => CliError::Violations(v),
            PipelineError::Weights(e) => CliError::Invalid(e.to_string()),
            other => CliError::Failed(format!("{}: {other}", other.code())),
        })?;
    Ok(if args.json { render_json(&outcome) } else { render_text(&outcome) })
}

#[derive(Serialize)]
struct JsonEntry<'a> {
    position: usize,
    uri: &'a str,
    borda_score: f64,
    score: u8,
    bucket: &'a str,
    r_relevance: usize,
    r_recency: usize,
    r_engagement: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
}

fn render_json(run: &PipelineRun) -> String {
    let entries: Vec<JsonEntry> = run
        .details
        .iter()
        .enumerate()
        .map(|(i, d)| JsonEntry {
            position: i + 1,
            uri: &d.uri,
            borda_score: d.ranks.borda_score,
            score: d.score,
            bucket: d.bucket.as_str(),
            r_relevance: d.ranks.r_relevance,
            r_recency: d.ranks.r_recency,
            r_engagement: d.ranks.r_engagement,
            source: d.fetched_via.as_ref().map(|s| s.identifier.as_str()),
        })
        .collect();
    let doc = json!({
        "weights": run.weights,
        "counts": run.counts,
        "curation": run.curation_report,
        "entries": entries,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("run report serializes");
    out.push('\n');
    out
}

/// One tab-separated line per ranked post (position, borda score, relevance
/// score, bucket, uri), then `#`-prefixed summary lines.
fn render_text(run: &PipelineRun) -> String {
    let mut out = String::new();
    for (i, d) in run.details.iter().enumerate() {
        let _ = writeln!(out, "{}\t{:.4}\t{}\t{}\t{}", i + 1, d.ranks.borda_score, d.score, d.bucket.as_str(), d.uri);
    }
    let (r, p, c) = run.weights.as_f64();
    let counts = &run.counts;
    let _ = writeln!(out, "# weights relevance={r} popularity={p} recency={c}");
    let _ = writeln!(
        out,
        "# fetched={} eligible={} excluded={} ranked={}",
        counts.fetched, counts.eligible, counts.excluded, counts.ranked
    );
    if run.curation_report.degraded {
        let _ = writeln!(out, "# degraded: {} evaluation(s) failed", run.curation_report.failures);
    }
    out
}

//! Pluggable language-model access.
//!
//! [`LmClient`] wraps a [`LmBackend`] and owns everything that is not
//! provider specific: payload validation before dispatch, the in-flight
//! bound, retry with exponential backoff on transient failures, the overall
//! deadline, and the single repair re-prompt when a reply does not match the
//! task schema. Backends only turn a request into raw reply text.

mod http;
mod mock;
pub mod schema;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

pub use http::{HttpBackend, RemoteProviderConfig};
pub use mock::{CurateRule, Fault, MockBackend, MockRules, MockRulesError, PlanRule, RuleSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmTask {
    Plan,
    SuggestSources,
    Curate,
}

impl fmt::Display for LmTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LmTask::Plan => "plan",
            LmTask::SuggestSources => "suggest_sources",
            LmTask::Curate => "curate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub task: LmTask,
    pub system_prompt: String,
    pub user_payload: Value,
    #[serde(default)]
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl LmRequest {
    pub fn new(task: LmTask, system_prompt: impl Into<String>, user_payload: Value) -> Self {
        Self { task, system_prompt: system_prompt.into(), user_payload, temperature: 0.0, max_output_tokens: 1024 }
    }

    /// Serialized form; used to check that request construction is stable.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmResponse {
    pub content: Value,
    pub provider_meta: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LmError {
    #[error("PROVIDER_UNREACHABLE: {0}")]
    ProviderUnreachable(String),
    #[error("SCHEMA_VIOLATION: {0}")]
    SchemaViolation(String),
    #[error("TIMEOUT after {0:?}")]
    Timeout(Duration),
}

impl LmError {
    pub fn code(&self) -> &'static str {
        match self {
            LmError::ProviderUnreachable(_) => "PROVIDER_UNREACHABLE",
            LmError::SchemaViolation(_) => "SCHEMA_VIOLATION",
            LmError::Timeout(_) => "TIMEOUT",
        }
    }
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: connection errors, 429, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    /// Raw model output, expected to be one JSON document.
    pub text: String,
    pub meta: Value,
}

#[async_trait]
pub trait LmBackend: Send + Sync {
    fn name(&self) -> &str;

    async fn call(&self, request: &LmRequest) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self { max_retries: 3, backoff_base_ms: 500, timeout_ms: 30_000, max_in_flight: 4 }
    }
}

/// Shareable handle used by the planner and curator.
#[derive(Clone)]
pub struct LmClient {
    backend: Arc<dyn LmBackend>,
    limiter: Arc<Semaphore>,
    settings: LmSettings,
}

impl fmt::Debug for LmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LmClient").field("backend", &self.backend.name()).field("settings", &self.settings).finish()
    }
}

impl LmClient {
    pub fn new(backend: Arc<dyn LmBackend>, settings: LmSettings) -> Self {
        let permits = settings.max_in_flight.max(1);
        Self { backend, limiter: Arc::new(Semaphore::new(permits)), settings }
    }

    pub fn mock(rules: MockRules) -> Self {
        Self::new(Arc::new(MockBackend::new(rules)), LmSettings::default())
    }

    pub fn settings(&self) -> &LmSettings {
        &self.settings
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub async fn complete(&self, request: &LmRequest) -> Result<LmResponse, LmError> {
        if !(0.0..=2.0).contains(&request.temperature) {
            return Err(LmError::SchemaViolation(format!("temperature {} outside [0, 2]", request.temperature)));
        }
        schema::validate_input(request.task, &request.user_payload)
            .map_err(|e| LmError::SchemaViolation(format!("request payload: {e}")))?;

        let _permit = self.limiter.acquire().await.expect("semaphore never closed");
        let deadline = Duration::from_millis(self.settings.timeout_ms);
        match tokio::time::timeout(deadline, self.complete_validated(request)).await {
            Ok(result) => result,
            Err(_) => Err(LmError::Timeout(deadline)),
        }
    }

    async fn complete_validated(&self, request: &LmRequest) -> Result<LmResponse, LmError> {
        let reply = self.dispatch(request).await?;
        let problem = match check_reply(request.task, &reply.text) {
            Ok(content) => return Ok(LmResponse { content, provider_meta: reply.meta }),
            Err(problem) => problem,
        };
        tracing::warn!(task = %request.task, backend = self.backend.name(), %problem, "reply failed schema, re-prompting");

        let mut repair = request.clone();
        repair.system_prompt = format!(
            "{}\n\nYour previous reply was rejected: {problem}\nReply again with exactly one JSON object that satisfies the schema.",
            request.system_prompt
        );
        let reply = self.dispatch(&repair).await?;
        check_reply(request.task, &reply.text)
            .map(|content| LmResponse { content, provider_meta: reply.meta })
            .map_err(LmError::SchemaViolation)
    }

    async fn dispatch(&self, request: &LmRequest) -> Result<BackendReply, LmError> {
        let mut attempt = 0u32;
        loop {
            match self.backend.call(request).await {
                Ok(reply) => return Ok(reply),
                Err(BackendError::Fatal(e)) => return Err(LmError::ProviderUnreachable(e)),
                Err(BackendError::Transient(e)) => {
                    if attempt >= self.settings.max_retries {
                        return Err(LmError::ProviderUnreachable(e));
                    }
                    let delay = self.settings.backoff_base_ms.saturating_mul(1 << attempt);
                    tracing::debug!(attempt, delay_ms = delay, error = %e, "retrying provider call");
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                    attempt += 1;
                }
            }
        }
    }
}

fn check_reply(task: LmTask, text: &str) -> Result<Value, String> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| format!("reply is not JSON: {e}"))?;
    schema::validate_output(task, &value)
}

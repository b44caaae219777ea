//! Chat-completions style HTTP backend.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, BackendReply, LmBackend, LmRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteProviderConfig {
    /// e.g. `https://api.example.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_key_env() -> String {
    "BONSAI_LM_API_KEY".to_string()
}

pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: &RemoteProviderConfig) -> Result<Self, BackendError> {
        let client =
            reqwest::Client::builder().build().map_err(|e| BackendError::Fatal(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
        })
    }

    pub fn request_body(&self, request: &LmRequest) -> Value {
        json!({
            "model": self.model,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_payload.to_string()},
            ],
        })
    }
}

/// Pulls the first choice's message text out of a completion response.
pub(crate) fn extract_content(body: &Value) -> Result<String, BackendError> {
    body["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| BackendError::Fatal("completion response has no choices[0].message.content".into()))
}

#[async_trait]
impl LmBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    async fn call(&self, request: &LmRequest) -> Result<BackendReply, BackendError> {
        let mut builder = self.client.post(&self.endpoint).json(&self.request_body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().await.map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("provider returned {status}")));
        }
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            return Err(BackendError::Fatal(format!("provider returned {status}: {text}")));
        }
        let body: Value = response.json().await.map_err(|e| BackendError::Transient(e.to_string()))?;
        let text = extract_content(&body)?;
        let meta = json!({
            "backend": "http",
            "model": body.get("model").cloned().unwrap_or(Value::Null),
            "usage": body.get("usage").cloned().unwrap_or(Value::Null),
        });
        Ok(BackendReply { text, meta })
    }
}

//! `bonsai feeds ...`: admin calls against a running service.

use std::fmt::Write as _;

use clap::{Args, Subcommand};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

use crate::CliError;

pub const PASSWORD_ENV: &str = "BONSAI_APP_PASSWORD";

#[derive(Debug, Args)]
pub struct FeedsArgs {
    /// Base URL of the feed service.
    #[arg(long, env = "BONSAI_SERVER", default_value = "http://127.0.0.1:8080")]
    pub server: String,
    /// Account handle to log in with. The app password is read from
    /// BONSAI_APP_PASSWORD.
    #[arg(long, env = "BONSAI_HANDLE")]
    pub handle: String,
    /// Print raw JSON responses.
    #[arg(long)]
    pub json: bool,
    #[command(subcommand)]
    pub action: FeedsAction,
}

#[derive(Debug, Subcommand)]
pub enum FeedsAction {
    /// List feeds owned by the account.
    List,
    /// Run a generation now and print its summary.
    Generate {
        #[arg(long)]
        id: String,
    },
    /// Stop serving and refreshing a feed.
    Deactivate {
        #[arg(long)]
        id: String,
    },
}

struct Client {
    http: reqwest::Client,
    base: String,
    token: String,
}

impl Client {
    async fn login(server: &str, handle: &str, password: &str) -> Result<Self, CliError> {
        let http = reqwest::Client::new();
        let base = server.trim_end_matches('/').to_string();
        let mut this = Self { http, base, token: String::new() };
        let session =
            this.call(Method::POST, "/api/session", Some(json!({"handle": handle, "app_password": password}))).await?;
        this.token = session["token"]
            .as_str()
            .ok_or_else(|| CliError::Failed("login response carries no token".into()))?
            .to_string();
        Ok(this)
    }

    async fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, CliError> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if !self.token.is_empty() {
            req = req.bearer_auth(&self.token);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.map_err(|e| CliError::Failed(format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| CliError::Failed(e.to_string()))?;
        if status.is_success() {
            return Ok(serde_json::from_str(&text).unwrap_or(Value::Null));
        }
        let message = format!("HTTP {}: {text}", status.as_u16());
        Err(match status {
            StatusCode::NOT_FOUND => CliError::NotFound(message),
            StatusCode::BAD_REQUEST | StatusCode::CONFLICT => CliError::Invalid(message),
            _ => CliError::Failed(message),
        })
    }
}

pub async fn execute(args: &FeedsArgs) -> Result<String, CliError> {
    let password = std::env::var(PASSWORD_ENV).map_err(|_| CliError::Invalid(format!("{PASSWORD_ENV} is not set")))?;
    let client = Client::login(&args.server, &args.handle, &password).await?;
    let (value, text) = match &args.action {
        FeedsAction::List => {
            let v = client.call(Method::GET, "/api/feeds", None).await?;
            let t = feed_table(&v);
            (v, t)
        }
        FeedsAction::Generate { id } => {
            let v = client.call(Method::POST, &format!("/api/feeds/{id}/generate"), None).await?;
            let t = run_summary(&v);
            (v, t)
        }
        FeedsAction::Deactivate { id } => {
            let v = client.call(Method::POST, &format!("/api/feeds/{id}/deactivate"), None).await?;
            let t = format!("{id} deactivated\n");
            (v, t)
        }
    };
    if args.json {
        let mut out = serde_json::to_string_pretty(&value).unwrap_or_default();
        out.push('\n');
        Ok(out)
    } else {
        Ok(text)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn feed_table(feeds: &Value) -> String {
    let rows: Vec<[String; 6]> = feeds
        .as_array()
        .map(|a| a.as_slice())
        .unwrap_or_default()
        .iter()
        .map(|f| {
            [
                cell(&f["feed_id"]),
                cell(&f["active"]),
                cell(&f["generation_id"]),
                cell(&f["entries"]),
                cell(&f["last_run"]["status"]),
                cell(&f["description"]),
            ]
        })
        .collect();
    let header = ["FEED", "ACTIVE", "GENERATION", "ENTRIES", "LAST RUN", "DESCRIPTION"].map(String::from);
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn run_summary(run: &Value) -> String {
    let c = &run["counts"];
    format!(
        "run {} feed {} status {} generation {}\nfetched {} eligible {} excluded {} ranked {}\n",
        cell(&run["run_id"]),
        cell(&run["feed_id"]),
        cell(&run["status"]),
        cell(&run["generation_id"]),
        cell(&c["fetched"]),
        cell(&c["eligible"]),
        cell(&c["excluded"]),
        cell(&c["ranked"]),
    )
}

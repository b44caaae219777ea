#![allow(dead_code)]

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

pub const HANDLE: &str = "operator.test";
pub const PASSWORD: &str = "operator-app-password";
pub const PUBLISHER: &str = "did:web:bonsai.test";

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_bonsai"))
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn bonsai(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("RUST_LOG").output().expect("bonsai binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Writes a service config pointing at `corpus`, with the scheduler off and
/// the clock frozen at the fixture reference time.
pub fn write_service_config(dir: &Path, corpus: &Path, latency_ms: u64) -> PathBuf {
    write_service_config_at(dir, corpus, latency_ms, "2025-03-01T12:00:00Z")
}

/// Like [`write_service_config`] with the clock frozen at `frozen_now`.
pub fn write_service_config_at(dir: &Path, corpus: &Path, latency_ms: u64, frozen_now: &str) -> PathBuf {
    let text = format!(
        r#"
[server]
host = "127.0.0.1"
port = 0

[storage]
data_dir = "{data}"

[scheduler]
enabled = false

[lm]
provider = "mock"
mock_rules = "{rules}"

[adapter]
kind = "fixture"
corpus = "{corpus}"
latency_ms = {latency_ms}

[[adapter.credentials]]
handle = "{HANDLE}"
app_password = "{PASSWORD}"

[catalog]
path = "{catalog}"

[feeds]
publisher_did = "{PUBLISHER}"

[clock]
frozen_now = "{frozen_now}"
"#,
        data = dir.join("data").display(),
        rules = fixture("mock_rules.json").display(),
        corpus = corpus.display(),
        catalog = fixture("catalog.jsonl").display(),
    );
    let path = dir.join("service.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// A `bonsai serve` child process, killed on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
    pub http: reqwest::blocking::Client,
    token: Option<String>,
}

impl Server {
    pub fn start(config: &Path) -> Self {
        let port = free_port();
        let child = Command::new(bin())
            .args(["serve", "--config"])
            .arg(config)
            .env("BONSAI__SERVER__PORT", port.to_string())
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn bonsai serve");
        let http = reqwest::blocking::Client::builder().timeout(Duration::from_secs(30)).build().unwrap();
        let mut server = Self { child, base: format!("http://127.0.0.1:{port}"), http, token: None };
        server.wait_ready();
        server
    }

    fn wait_ready(&mut self) {
        let deadline = Instant::now() + Duration::from_secs(15);
        while Instant::now() < deadline {
            if let Ok(Some(status)) = self.child.try_wait() {
                panic!("bonsai serve exited early with {status}");
            }
            if self.http.get(format!("{}/health", self.base)).send().is_ok_and(|r| r.status().is_success()) {
                return;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        panic!("bonsai serve did not become ready");
    }

    pub fn request(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> (u16, Value) {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().expect("request reaches the server");
        let status = resp.status().as_u16();
        let text = resp.text().unwrap_or_default();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub fn login(&mut self) {
        let (status, body) = self.request(
            reqwest::Method::POST,
            "/api/session",
            Some(json!({"handle": HANDLE, "app_password": PASSWORD})),
        );
        assert_eq!(status, 200, "{body}");
        self.token = Some(body["token"].as_str().unwrap().to_string());
    }

    pub fn token(&self) -> &str {
        self.token.as_deref().expect("logged in")
    }

    pub fn create_feed(&self, config: Value) {
        let (status, body) = self.request(reqwest::Method::POST, "/api/feeds", Some(config));
        assert_eq!(status, 201, "{body}");
    }

    pub fn feed_uri(feed_id: &str) -> String {
        format!("at://{PUBLISHER}/app.bsky.feed.generator/{feed_id}")
    }

    pub fn skeleton(&self, feed_id: &str, limit: usize, cursor: Option<&str>) -> (u16, Value) {
        let mut path = format!("/xrpc/app.bsky.feed.getFeedSkeleton?feed={}&limit={limit}", Self::feed_uri(feed_id));
        if let Some(c) = cursor {
            path.push_str(&format!("&cursor={c}"));
        }
        self.request(reqwest::Method::GET, &path, None)
    }

    /// Every uri served when following cursors from the top.
    pub fn walk(&self, feed_id: &str, limit: usize) -> Result<Vec<String>, String> {
        let mut out = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let (status, body) = self.skeleton(feed_id, limit, cursor.as_deref());
            if status != 200 {
                return Err(format!("skeleton returned {status}: {body}"));
            }
            let page = body["feed"].as_array().cloned().unwrap_or_default();
            if page.len() > limit {
                return Err(format!("page of {} exceeds limit {limit}", page.len()));
            }
            out.extend(page.iter().filter_map(|i| i["post"].as_str().map(String::from)));
            match body.get("cursor").and_then(Value::as_str) {
                Some(c) => cursor = Some(c.to_string()),
                None => return Ok(out),
            }
        }
    }

    /// SIGKILL, no shutdown hooks.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn pets_feed(feed_id: &str) -> Value {
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(fixture("feed_pets.json")).unwrap()).unwrap();
    cfg["feed_id"] = json!(feed_id);
    cfg
}

pub fn hashtag_feed(feed_id: &str, tag: &str) -> Value {
    json!({
        "feed_id": feed_id,
        "description": format!("posts tagged {tag}"),
        "sources": [{"kind": "hashtag", "identifier": tag, "display_title": format!("#{tag}"), "origin": "user_added"}],
        "include_prompts": [{"prompt_id": "i1", "text": "posts about cats", "polarity": "include", "strength": "preferred"}],
        "limit_prompts": [],
        "ranking": "balanced",
    })
}

/// Writes a corpus of `n` posts under `tag`, one every ten minutes before
/// the fixture reference time.
pub fn write_tag_corpus(path: &Path, tag: &str, n: usize) {
    let mut lines = String::new();
    for i in 0..n {
        let created = minutes_before_reference(10 * (i as i64 + 1));
        let line = json!({
            "source_identifier": tag,
            "post": {
                "uri": format!("at://did:plc:walker/app.bsky.feed.post/w{i:03}"),
                "author": "did:plc:walker",
                "text": if i % 2 == 0 { "a cat" } else { "a kitten" },
                "created_at": created,
                "likes": (i * 7) % 5,
                "reposts": i % 3,
                "replies": 0,
            }
        });
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    std::fs::write(path, lines).unwrap();
}

/// RFC 3339 timestamp `minutes` before 2025-03-01T12:00:00Z.
fn minutes_before_reference(minutes: i64) -> String {
    let base = chrono::DateTime::parse_from_rfc3339("2025-03-01T12:00:00Z").unwrap();
    (base - chrono::Duration::minutes(minutes)).to_utc().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

mod common;

use std::sync::Arc;

use axum::http::{Method, StatusCode};
use bonsai_core::lm::{Fault, LmClient, LmSettings, MockBackend, MockRules};
use common::*;
use serde_json::json;

#[tokio::test]
async fn health_is_public() {
    let h = Harness::new();
    let (status, body) = h.send(Method::GET, "/health", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn login_issues_a_bearer_token() {
    let h = Harness::new();
    let (status, body) =
        h.send(Method::POST, "/api/session", None, Some(json!({"handle": HANDLE, "app_password": PASSWORD}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["token"].as_str().unwrap().starts_with("bsn_"));
    assert_eq!(body["handle"], HANDLE);
}

#[tokio::test]
async fn wrong_password_is_rejected() {
    let h = Harness::new();
    let (status, body) =
        h.send(Method::POST, "/api/session", None, Some(json!({"handle": HANDLE, "app_password": "nope"}))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"], "INVALID_CREDENTIALS");
}

#[tokio::test]
async fn protected_routes_need_a_session() {
    let h = Harness::new();
    for (method, uri) in [
        (Method::GET, "/api/feeds"),
        (Method::POST, "/api/feeds/plan"),
        (Method::POST, "/api/feeds/x/generate"),
        (Method::GET, "/api/feeds/x/runs"),
    ] {
        let (status, body) = h.send(method.clone(), uri, None, None).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED, "{method} {uri}");
        assert_eq!(body["error"], "UNAUTHENTICATED");
        let (status, _) = h.send(method.clone(), uri, Some("bsn_bogus"), None).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED, "{method} {uri}");
    }
}

#[tokio::test]
async fn logout_revokes_the_token() {
    let h = Harness::new();
    let token = h.login().await;
    let (status, _) = h.send(Method::DELETE, "/api/session", Some(&token), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = h.send(Method::GET, "/api/feeds", Some(&token), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn presets_are_listed() {
    let h = Harness::new();
    let (status, body) = h.send(Method::GET, "/api/presets", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["focused"]["w_relevance"], 0.7);
    assert_eq!(body["trending"]["w_popularity"], 0.7);
}

#[tokio::test]
async fn plan_returns_a_valid_draft() {
    let h = Harness::new();
    let token = h.login().await;
    let (status, body) = h
        .send(
            Method::POST,
            "/api/feeds/plan",
            Some(&token),
            Some(json!({"description": "adorable pet pictures, no sad content"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(!body["sources"].as_array().unwrap().is_empty());
    assert!(!body["include_prompts"].as_array().unwrap().is_empty());
    assert_eq!(body["owner"], HANDLE);
    assert_eq!(body["active"], false);
}

#[tokio::test]
async fn plan_rejects_empty_description() {
    let h = Harness::new();
    let token = h.login().await;
    let (status, body) =
        h.send(Method::POST, "/api/feeds/plan", Some(&token), Some(json!({"description": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "EMPTY_DESCRIPTION");
}

#[tokio::test]
async fn plan_reports_provider_failure() {
    let backend = MockBackend::new(MockRules::default()).with_fault(Fault::Unreachable);
    let lm = LmClient::new(Arc::new(backend), LmSettings { max_retries: 0, ..LmSettings::default() });
    let h = Builder::new().lm(lm).build();
    let token = h.login().await;
    let (status, body) =
        h.send(Method::POST, "/api/feeds/plan", Some(&token), Some(json!({"description": "cats"}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["error"], "PLAN_FAILED");
}

#[tokio::test]
async fn suggest_sources_excludes_existing() {
    let h = Harness::new();
    let token = h.login().await;
    let draft = json!({
        "description": "quantum news",
        "sources": [{"kind": "hashtag", "identifier": "quantumcomputing", "display_title": "#quantumcomputing", "origin": "user_added"}],
        "include_prompts": [{"prompt_id": "i1", "text": "posts about quantum computing", "polarity": "include", "strength": "preferred"}],
    });
    let (status, body) = h.send(Method::POST, "/api/feeds/suggest-sources", Some(&token), Some(draft)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let sources = body["sources"].as_array().unwrap();
    assert!(!sources.is_empty());
    assert!(sources.iter().all(|s| s["identifier"] != "quantumcomputing"));
}

#[tokio::test]
async fn create_read_update_delete() {
    let h = Harness::new();
    let token = h.login().await;
    let created = h.create_pets(&token, "pets").await;
    assert_eq!(created["feed_id"], "pets");
    assert_eq!(created["owner"], HANDLE, "owner comes from the session, not the body");
    assert_eq!(created["active"], true);

    let (status, body) = h.send(Method::GET, "/api/feeds/pets", Some(&token), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["description"], created["description"]);

    let mut updated = body.clone();
    updated["ranking"] = json!("fresh");
    let (status, body) = h.send(Method::PUT, "/api/feeds/pets", Some(&token), Some(updated)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["ranking"], "fresh");
    assert_eq!(body["created_at"], created["created_at"]);

    let (status, list) = h.send(Method::GET, "/api/feeds", Some(&token), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["feed_uri"], h.feed_uri("pets"));
    assert_eq!(list[0]["generation_id"], json!(null));

    let (status, _) = h.send(Method::DELETE, "/api/feeds/pets", Some(&token), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = h.send(Method::GET, "/api/feeds/pets", Some(&token), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "FEED_NOT_FOUND");
}

#[tokio::test]
async fn create_without_id_mints_one() {
    let h = Harness::new();
    let token = h.login().await;
    let body = h.create_feed(&token, "", json!([{"kind": "hashtag", "identifier": "caturday", "display_title": "#caturday", "origin": "user_added"}])).await;
    let id = body["feed_id"].as_str().unwrap();
    assert!(id.starts_with('f') && id.len() == 13, "{id}");
}

#[tokio::test]
async fn duplicate_and_invalid_ids_are_rejected() {
    let h = Harness::new();
    let token = h.login().await;
    h.create_pets(&token, "pets").await;
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("feed_pets.json")).unwrap()).unwrap();
    let (status, body) = h.send(Method::POST, "/api/feeds", Some(&token), Some(cfg.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "FEED_EXISTS");

    cfg["feed_id"] = json!("../etc");
    let (status, body) = h.send(Method::POST, "/api/feeds", Some(&token), Some(cfg)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "INVALID_FEED_ID");
}

#[tokio::test]
async fn invalid_config_reports_violations() {
    let h = Harness::new();
    let token = h.login().await;
    let cfg = json!({
        "feed_id": "bad",
        "description": "",
        "sources": [{"kind": "hashtag", "identifier": "caturday", "display_title": "#caturday", "origin": "user_added"}],
        "include_prompts": [{"prompt_id": "i1", "text": "cats", "polarity": "include", "strength": "never_shown"}],
        "limit_prompts": [],
    });
    let (status, body) = h.send(Method::POST, "/api/feeds", Some(&token), Some(cfg)).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["error"], "VALIDATION_FAILED");
    let codes: Vec<&str> = body["violations"].as_array().unwrap().iter().map(|v| v["code"].as_str().unwrap()).collect();
    assert!(codes.contains(&"ILLEGAL_STRENGTH"), "{codes:?}");
    assert!(codes.contains(&"EMPTY_DESCRIPTION"), "{codes:?}");
    let (status, _) = h.send(Method::GET, "/api/feeds/bad", Some(&token), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "nothing is persisted");
}

#[tokio::test]
async fn malformed_body_is_invalid_request() {
    let h = Harness::new();
    let token = h.login().await;
    let (status, body) = h.send(Method::POST, "/api/feeds", Some(&token), Some(json!({"sources": "nope"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "INVALID_REQUEST");
}

#[tokio::test]
async fn other_owners_cannot_mutate() {
    let h = Harness::new();
    let alice = h.login().await;
    let bob = h.login_as(OTHER_HANDLE, OTHER_PASSWORD).await;
    h.create_pets(&alice, "pets").await;

    let (status, list) = h.send(Method::GET, "/api/feeds", Some(&bob), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(list.as_array().unwrap().is_empty());

    for (method, uri) in [
        (Method::DELETE, "/api/feeds/pets"),
        (Method::POST, "/api/feeds/pets/generate"),
        (Method::POST, "/api/feeds/pets/deactivate"),
        (Method::GET, "/api/feeds/pets/runs"),
    ] {
        let (status, body) = h.send(method.clone(), uri, Some(&bob), None).await;
        assert_eq!(status, StatusCode::FORBIDDEN, "{method} {uri}");
        assert_eq!(body["error"], "FORBIDDEN");
    }
}

#[tokio::test]
async fn unknown_feed_is_not_found() {
    let h = Harness::new();
    let token = h.login().await;
    for (method, uri) in [
        (Method::GET, "/api/feeds/ghost"),
        (Method::POST, "/api/feeds/ghost/generate"),
        (Method::POST, "/api/feeds/ghost/activate"),
        (Method::GET, "/api/feeds/ghost/preview"),
    ] {
        let (status, body) = h.send(method.clone(), uri, Some(&token), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {uri}");
        assert_eq!(body["error"], "FEED_NOT_FOUND");
    }
}

#[tokio::test]
async fn describe_lists_active_feeds() {
    let h = Harness::new();
    let token = h.login().await;
    h.create_pets(&token, "pets").await;
    h.create_pets(&token, "quiet").await;
    h.send(Method::POST, "/api/feeds/quiet/deactivate", Some(&token), None).await;
    let (status, body) = h.send(Method::GET, "/xrpc/app.bsky.feed.describeFeedGenerator", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["did"], PUBLISHER);
    assert_eq!(body["feeds"], json!([{"uri": h.feed_uri("pets")}]));
}

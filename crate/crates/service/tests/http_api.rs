mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use challenge_core::fixture;
use challenge_service::router;
use common::{open, toy_request, ADMIN, SYSTEMS};

async fn call(app: &Router, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

async fn toy_app(items: usize, annotators: usize) -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(open(dir.path())));
    let body = serde_json::to_value(toy_request(items, annotators, 4)).unwrap();
    let (status, text) = call(&app, "POST", "/projects", Some(ADMIN), Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{text}");
    assert_eq!(json(&text)["slots"], json!(items * 2 * annotators));
    (dir, app)
}

fn assert_blind(body: &str, systems: &[&str]) {
    assert!(!body.contains("system_id"), "{body}");
    for s in systems {
        assert!(!body.contains(s), "{s} leaked: {body}");
    }
}

#[tokio::test]
async fn annotator_endpoints_never_reveal_systems() {
    let (_dir, app) = toy_app(3, 1).await;
    let token = Some("token-0");
    let mut bodies = Vec::new();

    let (status, session) = call(&app, "GET", "/projects/toy/session", token, None).await;
    assert_eq!(status, StatusCode::OK);
    bodies.push(session);

    // Walk the whole session, including a revision and error responses.
    loop {
        let (status, next) = call(&app, "GET", "/projects/toy/next", token, None).await;
        assert_eq!(status, StatusCode::OK);
        bodies.push(next.clone());
        let next = json(&next);
        if next["done"] == json!(true) {
            assert!(next["item"].is_null());
            break;
        }
        let item = &next["item"];
        assert!(item["question"].as_str().unwrap().len() > 5);
        assert!(!item["reference_highlights"].as_array().unwrap().is_empty());
        for out in item["outputs"].as_array().unwrap() {
            for verdict in ["no", "yes"] {
                let body = json!({"item_id": item["item_id"], "blind_label": out["blind_label"], "verdict": verdict});
                let (status, ack) = call(&app, "POST", "/projects/toy/judgments", token, Some(body)).await;
                assert_eq!(status, StatusCode::OK, "{ack}");
                bodies.push(ack);
            }
        }
    }
    let bad = json!({"item_id": "S1a", "blind_label": "Z", "verdict": "maybe"});
    bodies.push(call(&app, "POST", "/projects/toy/judgments", token, Some(bad)).await.1);
    let bad = json!({"item_id": "S1a", "blind_label": "Z", "verdict": "yes"});
    bodies.push(call(&app, "POST", "/projects/toy/judgments", token, Some(bad)).await.1);
    let (status, progress) = call(&app, "GET", "/projects/toy/progress", token, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&progress)["annotators"]["rater0"], json!({"judged": 6, "total": 6}));
    bodies.push(progress);
    bodies.push(call(&app, "GET", "/projects/toy/export", token, None).await.1);

    for body in &bodies {
        assert_blind(body, &SYSTEMS);
    }

    // The admin export is where the systems come back.
    let (status, export) = call(&app, "GET", "/projects/toy/export", Some(ADMIN), None).await;
    assert_eq!(status, StatusCode::OK);
    let export = json(&export);
    assert_eq!(export["complete"], json!(true));
    let judgments = export["judgments"].as_array().unwrap();
    assert_eq!(judgments.len(), 6);
    for j in judgments {
        assert!(SYSTEMS.contains(&j["system_id"].as_str().unwrap()));
        assert_eq!(j["verdict"], "yes");
        assert_eq!(j["revision"], 1);
    }
}

#[tokio::test]
async fn embedded_project_next_payload_is_blind() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(open(dir.path())));
    let body = serde_json::to_value(common::embedded_request(3)).unwrap();
    let (status, text) = call(&app, "POST", "/projects", Some(ADMIN), Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{text}");
    assert_eq!(json(&text)["slots"], 972);
    for k in 0..3 {
        let token = format!("token-{k}");
        let (_, session) = call(&app, "GET", "/projects/appendix/session", Some(&token), None).await;
        let (_, next) = call(&app, "GET", "/projects/appendix/next", Some(&token), None).await;
        for body in [session, next] {
            assert_blind(&body, &fixture::SYSTEMS);
        }
    }
}

#[tokio::test]
async fn errors_have_code_message_detail() {
    let (_dir, app) = toy_app(3, 2).await;

    let (status, body) = call(&app, "GET", "/projects/toy/next", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let body = json(&body);
    assert_eq!(body["code"], "unauthorized");
    assert!(body["message"].is_string());
    assert!(body.as_object().unwrap().contains_key("detail"));

    let (status, body) = call(&app, "GET", "/projects/nope/next", Some("token-0"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["code"], "unknown-project");

    let (status, body) = call(&app, "GET", "/projects/toy/export", Some("token-1"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(json(&body)["code"], "forbidden");

    let maybe = json!({"item_id": "S1a", "blind_label": "A", "verdict": "maybe"});
    let (status, body) = call(&app, "POST", "/projects/toy/judgments", Some("token-0"), Some(maybe)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json(&body);
    assert_eq!(body["code"], "invalid-verdict");
    assert_eq!(body["detail"]["allowed"], json!(["yes", "no", "not-applicable"]));

    let (status, body) = call(&app, "POST", "/projects/toy/judgments", Some("token-0"), Some(json!({"x": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["code"], "bad-request");

    let create = serde_json::to_value(toy_request(3, 2, 4)).unwrap();
    let (status, _) = call(&app, "POST", "/projects", Some("token-0"), Some(create.clone())).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, body) = call(&app, "POST", "/projects", Some(ADMIN), Some(create)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json(&body)["code"], "duplicate-project");

    let mut incomplete = toy_request(3, 2, 4);
    incomplete.project_id = Some("other".into());
    incomplete.outputs.pop();
    let (status, body) =
        call(&app, "POST", "/projects", Some(ADMIN), Some(serde_json::to_value(incomplete).unwrap())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json(&body);
    assert_eq!(body["code"], "incomplete-matrix");
    assert_eq!(body["detail"]["missing"], json!([{"system_id": SYSTEMS[1], "item_id": "S1c"}]));
}

#[tokio::test]
async fn empty_export_flags_every_pair_incomplete() {
    let (_dir, app) = toy_app(3, 2).await;
    let (status, body) = call(&app, "GET", "/projects/toy/export", Some(ADMIN), None).await;
    assert_eq!(status, StatusCode::OK);
    let body = json(&body);
    assert_eq!(body["judgments"], json!([]));
    let pairs = body["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 6);
    assert!(pairs.iter().all(|p| p["complete"] == json!(false)));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_http_submissions() {
    let (dir, app) = toy_app(4, 2).await;
    let mut tasks = Vec::new();
    for w in 0..10 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let token = format!("token-{}", w % 2);
            let (_, session) = call(&app, "GET", "/projects/toy/session", Some(&token), None).await;
            let session = json(&session);
            let mut revisions = Vec::new();
            for item in session["items"].as_array().unwrap() {
                for out in item["blinded_outputs"].as_array().unwrap() {
                    let body = json!({"item_id": item["item_id"], "blind_label": out["blind_label"], "verdict": "yes"});
                    let (status, ack) = call(&app, "POST", "/projects/toy/judgments", Some(&token), Some(body)).await;
                    assert_eq!(status, StatusCode::OK);
                    revisions.push(json(&ack)["revision"].as_u64().unwrap());
                }
            }
            revisions
        }));
    }
    let mut all = Vec::new();
    for t in tasks {
        all.extend(t.await.unwrap());
    }
    assert_eq!(all.len(), 80);
    drop(app);
    let records = open(dir.path()).project("toy").unwrap().all_records();
    assert_eq!(records.len(), 80);
    // Five writers per annotator: each slot holds revisions 0..5.
    let mut sorted: Vec<u64> = records.iter().map(|r| r.revision).collect();
    sorted.sort_unstable();
    let expected: Vec<u64> = (0..5).flat_map(|r| std::iter::repeat_n(r, 16)).collect();
    assert_eq!(sorted, expected);
}

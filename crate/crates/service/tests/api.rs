mod support;

use axum::http::{Method, StatusCode};
use serde_json::json;
use support::{app, b64, badge_payload, bookmarks_survive_restart, call, crowded_png, fixture, fuzz};

#[tokio::test]
async fn analyze_returns_document_and_layers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (st, body) = call(&app, Method::POST, "/api/analyze", Some(badge_payload())).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    let layers = body["layers"].as_array().unwrap();
    let ids: Vec<&str> = layers.iter().map(|l| l["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["bg", "g0", "a0", "d0"]);
    let depths: Vec<u64> = layers.iter().map(|l| l["depth"].as_u64().unwrap()).collect();
    assert_eq!(depths, [0, 1, 2, 3]);
    assert_eq!(layers[2]["element_type"], "circle");
    let id = body["doc_id"].as_str().unwrap();
    let (st, again) = call(&app, Method::GET, &format!("/api/documents/{id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(again["document"], body["document"]);
}

#[tokio::test]
async fn analyze_rejects_corrupt_and_crowded_images() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (st, body) = call(&app, Method::POST, "/api/analyze", Some(json!({ "image_png": b64(b"\x89PNG\r\n\x1a\nnope") }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_image");
    let (st, body) = call(&app, Method::POST, "/api/analyze", Some(json!({ "image_png": b64(&crowded_png()) }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"]["code"], "capacity");
    assert_eq!(body["error"]["count"], 26);
}

#[tokio::test]
async fn scenario_recommendation_honors_pins_and_bindings() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let fx = fixture(&app).await;
    let prefs = json!({ "exact": { "d0": "#FFFFFF" }, "vague": { "bg": "light" }, "bindings": [["a0", "d0"]] });
    let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc_id": fx.doc_id, "prefs": prefs, "seed": 3 }))).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    let palettes = body["palettes"].as_array().unwrap();
    assert!(!palettes.is_empty() && palettes.len() <= 5);
    for p in palettes {
        assert_eq!(p["colors"]["d0"], "#FFFFFF");
        assert_eq!(p["colors"]["a0"], "#FFFFFF");
    }
    let (_, again) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc_id": fx.doc_id, "prefs": prefs, "seed": 3 }))).await;
    let colors = |v: &serde_json::Value| v["palettes"].as_array().unwrap().iter().map(|p| p["colors"].clone()).collect::<Vec<_>>();
    assert_eq!(colors(&body), colors(&again), "fixed seed must reproduce");
}

#[tokio::test]
async fn recommend_contract() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let fx = fixture(&app).await;
    let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc_id": fx.doc_id, "n": 1 }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["palettes"].as_array().unwrap().len(), 1);

    let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc_id": fx.doc_id, "prefs": { "vague": { "bg": "blorp" } } }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "unknown_word");
    assert_eq!(body["error"]["word"], "blorp");
    assert!(body["error"]["message"].as_str().unwrap().contains("blorp"));

    let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc_id": "nope" }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["resource"], "document");

    let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "doc": fx.document, "n": 2 }))).await;
    assert_eq!(st, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn history_grows_by_one_per_request() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let fx = fixture(&app).await;
    for r in 2..=4 {
        let (st, body) = call(&app, Method::POST, "/api/recommend", Some(json!({ "session_id": fx.session }))).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(body["history_index"], r - 1);
        let (_, s) = call(&app, Method::GET, &format!("/api/sessions/{}", fx.session), None).await;
        assert_eq!(s["history"].as_array().unwrap().len(), r as usize);
    }
    let (st, entry) = call(&app, Method::POST, &format!("/api/sessions/{}/choose", fx.session), Some(json!({ "palette_id": fx.palette_id }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(entry["chosen"], json!(fx.palette_id));
}

#[tokio::test]
async fn bookmark_crud() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let fx = fixture(&app).await;
    let uri = format!("/api/sessions/{}/bookmarks", fx.session);
    let (st, b) = call(&app, Method::POST, &uri, Some(json!({ "palette_id": fx.palette_id }))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(b["palette"]["id"], json!(fx.palette_id));
    let (_, list) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);

    let inline = json!({ "palette": b["palette"] });
    let (st, b2) = call(&app, Method::POST, &uri, Some(inline)).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_ne!(b2["id"], b["id"]);

    let del = format!("{uri}/{}", b["id"].as_str().unwrap());
    let (st, _) = call(&app, Method::DELETE, &del, None).await;
    assert_eq!(st, StatusCode::NO_CONTENT);
    let (_, list) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert!(list[0]["id"] != b["id"]);
    let (st, body) = call(&app, Method::DELETE, &del, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["resource"], "bookmark");
}

#[tokio::test]
async fn bookmarks_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bookmarks_survive_restart(dir.path()).await, Ok(1));
    // No temp file is left behind by the atomic replace.
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["store.json"]);
}

#[tokio::test]
async fn framework_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (st, body) = call(&app, Method::PUT, "/api/analyze", None).await;
    assert_eq!(st, StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(body["error"]["code"], "method_not_allowed");
    let (st, body) = call(&app, Method::GET, "/api/missing", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "no_route");
}

#[tokio::test]
async fn fuzz_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let report = fuzz(&app, 200, 99).await;
    assert_eq!(report.structured_4xx, report.sent, "{:#?}", report.failures);
}

//! Shared helpers for the service tests: an in-process app, request
//! plumbing, the malformed-request fuzzer and the restart check.

#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use palettizer::raster::RasterImage;
use palettizer::recommender::MiceImputer;
use palettizer::synth::badge_card;
use palettizer::{BBox, RgbColor};
use palettizer_service::config::fallback_model;
use palettizer_service::{router, AppState, SeedPolicy, ServiceConfig, Store};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

fn model() -> Arc<MiceImputer> {
    static MODEL: OnceLock<Arc<MiceImputer>> = OnceLock::new();
    MODEL.get_or_init(|| Arc::new(fallback_model().unwrap())).clone()
}

/// App backed by a store file in `dir`. Reusing `dir` simulates a restart.
pub fn app(dir: &Path) -> Router {
    let config = ServiceConfig {
        store_path: dir.join("store.json"),
        seed_policy: SeedPolicy::Fixed { seed: 1 },
        ..Default::default()
    };
    let state = AppState {
        store: Arc::new(Store::open(&config.store_path).unwrap()),
        model: model(),
        lexicon: Arc::new(palettizer::prefs::Lexicon::builtin()),
        config,
    };
    router(state)
}

pub fn json_request(method: Method, uri: &str, body: &Value) -> Request<Body> {
    Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn empty_request(method: Method, uri: &str) -> Request<Body> {
    Request::builder().method(method).uri(uri).body(Body::empty()).unwrap()
}

/// Status, content type and body (JSON when it parses, else a string).
pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Option<String>, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let ctype = res
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap_or("").to_string());
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
    };
    (status, ctype, body)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = match body {
        Some(b) => json_request(method, uri, &b),
        None => empty_request(method, uri),
    };
    let (status, _, body) = send(app, req).await;
    (status, body)
}

pub fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn badge_payload() -> Value {
    let (img, ann, _) = badge_card();
    json!({ "image_png": b64(&img.encode_png()), "annotations": ann })
}

/// 25 separate squares on a white page: 26 nodes, over capacity.
pub fn crowded_png() -> Vec<u8> {
    let mut img = RasterImage::filled(500, 500, RgbColor::new(255, 255, 255));
    for i in 0..25u32 {
        img.fill_rect(BBox::new(20 + 95 * (i % 5), 20 + 95 * (i / 5), 60, 60), RgbColor::new(20, 40, 160));
    }
    img.encode_png()
}

/// A session with an analyzed document and one recommendation round.
pub struct Fixture {
    pub session: String,
    pub doc_id: String,
    pub document: Value,
    pub palette_id: String,
}

pub async fn fixture(app: &Router) -> Fixture {
    let (st, session) = call(app, Method::POST, "/api/sessions", Some(json!({}))).await;
    assert_eq!(st, StatusCode::CREATED, "{session}");
    let sid = session["id"].as_str().unwrap().to_string();
    let mut payload = badge_payload();
    payload["session_id"] = json!(sid);
    let (st, analyzed) = call(app, Method::POST, "/api/analyze", Some(payload)).await;
    assert_eq!(st, StatusCode::CREATED, "{analyzed}");
    let (st, rec) = call(app, Method::POST, "/api/recommend", Some(json!({ "session_id": sid, "n": 3, "seed": 5 }))).await;
    assert_eq!(st, StatusCode::OK, "{rec}");
    Fixture {
        session: sid,
        doc_id: analyzed["doc_id"].as_str().unwrap().to_string(),
        document: analyzed["document"].clone(),
        palette_id: rec["palettes"][0]["id"].as_str().unwrap().to_string(),
    }
}

fn random_json<R: Rng>(rng: &mut R, depth: usize) -> Value {
    match rng.gen_range(0..if depth > 2 { 5 } else { 7 }) {
        0 => Value::Null,
        1 => json!(rng.gen::<bool>()),
        2 => json!(rng.gen_range(-1e6..1e6)),
        3 => json!(rng.gen::<i64>()),
        4 => json!(["", "x", "#FFFFFF", "light", "bg", "a0", "\u{0}", "-1"][rng.gen_range(0..8)]),
        5 => Value::Array((0..rng.gen_range(0..4)).map(|_| random_json(rng, depth + 1)).collect()),
        _ => {
            let keys = ["prefs", "exact", "vague", "bindings", "n", "doc", "doc_id", "session_id", "image_png", "annotations", "palette", "palette_id", "seed", "nodes", "root"];
            Value::Object(
                (0..rng.gen_range(0..4))
                    .map(|_| (keys[rng.gen_range(0..keys.len())].to_string(), random_json(rng, depth + 1)))
                    .collect(),
            )
        }
    }
}

/// Malformed document mutations: cycles, dangling children, capacity.
fn broken_doc<R: Rng>(rng: &mut R, doc: &Value) -> Value {
    let mut d = doc.clone();
    match rng.gen_range(0..5) {
        0 => d["nodes"][1]["children"] = json!([d["root"].clone()]),
        1 => d["nodes"][0]["children"] = json!(["ghost"]),
        2 => {
            let mut kids = Vec::new();
            let template = d["nodes"][1].clone();
            for i in 0..25 {
                let mut n = template.clone();
                n["id"] = json!(format!("extra{i}"));
                n["children"] = json!([]);
                kids.push(json!(format!("extra{i}")));
                d["nodes"].as_array_mut().unwrap().push(n);
            }
            d["nodes"][0]["children"] = json!(kids);
        }
        3 => d["root"] = json!("nowhere"),
        _ => d["schema"] = json!("something-else/9"),
    }
    d
}

/// One malformed request of a randomly chosen family.
pub fn malformed_request<R: Rng>(rng: &mut R, fx: &Fixture) -> (String, Request<Body>) {
    let sid = &fx.session;
    let post_paths = [
        "/api/analyze".to_string(),
        "/api/recommend".to_string(),
        "/api/sessions".to_string(),
        format!("/api/sessions/{sid}/bookmarks"),
        format!("/api/sessions/{sid}/choose"),
    ];
    let path = post_paths.choose(rng).unwrap().clone();
    let family = rng.gen_range(0..14);
    let req = match family {
        // Random bytes declared as JSON.
        0 => {
            let bytes: Vec<u8> = (0..rng.gen_range(1..200)).map(|_| rng.gen()).collect();
            Request::post(&path).header(header::CONTENT_TYPE, "application/json").body(Body::from(bytes)).unwrap()
        }
        // Well-formed JSON of the wrong shape.
        1 => {
            let mut v = random_json(rng, 0);
            if path == "/api/sessions" && (v.is_object() || v.is_null()) {
                v = json!([v]);
            }
            json_request(Method::POST, &path, &v)
        }
        // Truncated JSON.
        2 => {
            let s = json!({ "prefs": { "exact": { "a0": "#FFFFFF" } }, "n": 3 }).to_string();
            let cut = rng.gen_range(1..s.len());
            Request::post(&path).header(header::CONTENT_TYPE, "application/json").body(Body::from(s[..cut].to_string())).unwrap()
        }
        // Missing or wrong content type.
        3 => Request::post(&path)
            .header(header::CONTENT_TYPE, ["text/plain", "image/png", "application/x-www-form-urlencoded"][rng.gen_range(0..3)])
            .body(Body::from("{}"))
            .unwrap(),
        // Wrong method or unknown route.
        4 => {
            let m = [Method::PUT, Method::PATCH, Method::DELETE, Method::GET][rng.gen_range(0..4)].clone();
            let p = ["/api/analyze", "/api/recommend", "/api/nope", "/api", "/api/sessions/x/y/z", "/"][rng.gen_range(0..6)];
            empty_request(if p == "/api/recommend" && m == Method::GET { Method::PUT } else { m }, p)
        }
        // Analyze: bad base64, non-PNG bytes, truncated PNG, bad annotations.
        5 => {
            let (img, ann, _) = badge_card();
            let png = img.encode_png();
            let body = match rng.gen_range(0..5) {
                0 => json!({ "image_png": "***not base64***" }),
                1 => json!({ "image_png": b64(&(0..64).map(|_| rng.gen()).collect::<Vec<u8>>()) }),
                2 => json!({ "image_png": b64(&png[..rng.gen_range(8..png.len() / 2)]) }),
                3 => {
                    let mut a = serde_json::to_value(&ann).unwrap();
                    a["data_elements"][0]["bbox"] = json!({ "x": 190, "y": 150, "w": 50, "h": 50 });
                    json!({ "image_png": b64(&png), "annotations": a })
                }
                _ => json!({ "image_png": b64(&crowded_png()) }),
            };
            json_request(Method::POST, "/api/analyze", &body)
        }
        // Recommend with bad preferences on a real document.
        6 => {
            let prefs = match rng.gen_range(0..7) {
                0 => json!({ "vague": { "bg": "blorp" } }),
                1 => json!({ "exact": { "ghost": "#FFFFFF" } }),
                2 => json!({ "exact": { "g0": "#FFFFFF" } }),
                3 => json!({ "exact": { "bg": "#FFFFFF" }, "vague": { "bg": "light" } }),
                4 => json!({ "bindings": [["bg", "a0"], ["a0", "d0"]] }),
                5 => json!({ "exact": { "bg": "#FFFFFF", "a0": "#000000" }, "bindings": [["bg", "a0"]] }),
                _ => json!({ "exact": { "bg": "#GGGGGG" } }),
            };
            json_request(Method::POST, "/api/recommend", &json!({ "doc_id": fx.doc_id, "prefs": prefs }))
        }
        // Recommend: unknown ids, bad n, missing document.
        7 => {
            let body = match rng.gen_range(0..5) {
                0 => json!({ "doc_id": "missing" }),
                1 => json!({ "session_id": "missing" }),
                2 => {
                    let n = [0u64, 51, 100_000][rng.gen_range(0..3)];
                    json!({ "doc_id": fx.doc_id, "n": n })
                }
                3 => json!({ "n": 3 }),
                _ => json!({ "doc_id": fx.doc_id, "n": -1 }),
            };
            json_request(Method::POST, "/api/recommend", &body)
        }
        // Inline documents with broken structure.
        8 => json_request(Method::POST, "/api/recommend", &json!({ "doc": broken_doc(rng, &fx.document) })),
        // Sessions and bookmarks that do not exist.
        9 => match rng.gen_range(0..5) {
            0 => empty_request(Method::GET, "/api/sessions/missing"),
            1 => empty_request(Method::GET, "/api/sessions/missing/bookmarks"),
            2 => empty_request(Method::DELETE, &format!("/api/sessions/{sid}/bookmarks/missing")),
            3 => json_request(Method::POST, "/api/sessions", &json!({ "doc_id": "missing" })),
            _ => empty_request(Method::GET, "/api/documents/missing"),
        },
        // Bookmark bodies that name nothing or both.
        10 => {
            let body = match rng.gen_range(0..3) {
                0 => json!({}),
                1 => json!({ "palette_id": "missing" }),
                _ => json!({ "palette_id": fx.palette_id, "palette": { "id": "x" } }),
            };
            json_request(Method::POST, &format!("/api/sessions/{sid}/bookmarks"), &body)
        }
        // Choosing an unknown palette.
        11 => json_request(Method::POST, &format!("/api/sessions/{sid}/choose"), &json!({ "palette_id": "missing" })),
        // Unknown fields.
        12 => json_request(Method::POST, "/api/recommend", &json!({ "doc_id": fx.doc_id, "colour": "red" })),
        // Oversized body.
        _ => Request::post("/api/analyze")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(vec![b' '; 17 * 1024 * 1024]))
            .unwrap(),
    };
    (format!("family {family} {} {}", req.method(), req.uri()), req)
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub sent: usize,
    pub structured_4xx: usize,
    pub failures: Vec<String>,
}

/// Send `n` malformed requests; each must produce a 4xx with the
/// structured error body. The app must still be healthy afterwards.
pub async fn fuzz(app: &Router, n: usize, seed: u64) -> FuzzReport {
    let fx = fixture(app).await;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    for _ in 0..n {
        let (label, req) = malformed_request(&mut rng, &fx);
        let (status, ctype, body) = send(app, req).await;
        report.sent += 1;
        let structured = status.is_client_error()
            && ctype.as_deref().is_some_and(|c| c.starts_with("application/json"))
            && body["error"]["status"] == json!(status.as_u16())
            && body["error"]["code"].as_str().is_some_and(|c| !c.is_empty())
            && body["error"]["message"].is_string();
        if structured {
            report.structured_4xx += 1;
        } else if report.failures.len() < 10 {
            report.failures.push(format!("{label}: {status} {body}"));
        }
    }
    let (status, _) = call(app, Method::GET, "/api/health", None).await;
    if status != StatusCode::OK {
        report.failures.push(format!("health after fuzz: {status}"));
    }
    report
}

/// Bookmark a palette, drop the app, reopen the store and look again.
pub async fn bookmarks_survive_restart(dir: &Path) -> Result<usize, String> {
    let first = app(dir);
    let fx = fixture(&first).await;
    let uri = format!("/api/sessions/{}/bookmarks", fx.session);
    let (st, b) = call(&first, Method::POST, &uri, Some(json!({ "palette_id": fx.palette_id }))).await;
    if st != StatusCode::CREATED {
        return Err(format!("bookmark failed: {st} {b}"));
    }
    drop(first);

    let second = app(dir);
    let (st, list) = call(&second, Method::GET, &uri, None).await;
    if st != StatusCode::OK {
        return Err(format!("list after restart: {st} {list}"));
    }
    let list = list.as_array().cloned().unwrap_or_default();
    if list.iter().any(|x| x == &b) {
        Ok(list.len())
    } else {
        Err(format!("bookmark {} missing after restart", b["id"]))
    }
}

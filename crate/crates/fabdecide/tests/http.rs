use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use fabdecide::api::Api;
use fabdecide::rates::{RateService, RateSourceConfig};
use fabdecide::server::{router, AppState};
use fabdecide_core::seed;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(ui: Option<std::path::PathBuf>) -> Router {
    let rates = RateService::new(RateSourceConfig::default()).unwrap();
    router(AppState { api: Api::new(seed::catalog()), rates: Arc::new(rates) }, ui)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_owned())).unwrap_or_default()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let text = body.map(|b| b.to_string());
    let (status, bytes) = call(app, method, uri, text.as_deref()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn production() -> Value {
    json!({
        "technology_id": "tsmc65", "die_area_mm2": 100, "volume": 1_000_000,
        "wafer": { "edge_exclusion_mm": 0, "scribe_mm": 0 },
        "yield": { "model": "poisson", "d0_per_mm2": 0.0025 },
    })
}

#[tokio::test]
async fn production_example() {
    let (status, v) = call_json(&app(None), "POST", "/v1/estimate/production", Some(production())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["unit_cost_micro"], 4_514_000);
    assert_eq!(v["gross_dies_per_wafer"], 640);
}

#[tokio::test]
async fn error_statuses() {
    let app = app(None);
    let mut zero = production();
    zero["volume"] = json!(0);
    let (status, v) = call_json(&app, "POST", "/v1/estimate/production", Some(zero)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["status"], 400);

    let (status, bytes) = call(&app, "POST", "/v1/estimate/production", Some("{oops")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["error"]["code"], "malformed_body");

    let (status, v) = call_json(&app, "GET", "/v1/technologies/nosuch", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "unknown_technology");

    let mut dirty = production();
    dirty["yield"]["d0_per_mm2"] = json!(0.5);
    let (status, v) = call_json(&app, "POST", "/v1/estimate/production", Some(dirty)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "infeasible_yield");

    let (status, _) = call_json(&app, "GET", "/v1/nothing-here", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn technologies() {
    let app = app(None);
    let (status, v) = call_json(&app, "GET", "/v1/technologies", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<_> = v["technologies"].as_array().unwrap().iter().map(|n| n["id"].clone()).collect();
    assert_eq!(ids, [json!("tsmc180gp"), json!("tsmc65"), json!("cmos350"), json!("gf12"), json!("cmos14")]);
    assert_eq!(v["technologies"][0]["mpw_price_per_mm2"], json!({ "amount_minor": 110_000, "currency": "USD" }));

    let (_, v) = call_json(&app, "GET", "/v1/technologies?where=node_nm%3C%3D65&where=addons!%3DHV", None).await;
    assert_eq!(v["technologies"].as_array().unwrap().len(), 3);

    let (status, _) = call_json(&app, "GET", "/v1/technologies?where=colour%3Dred", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, v) = call_json(&app, "GET", "/v1/technologies/gf12", None).await;
    assert_eq!(v["mask_cost"]["currency"], "EUR");
}

#[tokio::test]
async fn rates_and_health() {
    let app = app(None);
    let (_, v) = call_json(&app, "GET", "/v1/rates", None).await;
    assert_eq!(v["as_of"], "2022-08-12");
    assert_eq!(v["source"], "snapshot");
    assert_eq!(v["warning"], Value::Null);
    assert!(v["rates"].as_array().unwrap().iter().any(|r| r["from"] == "USD" && r["rate"] == "19.1516000"));
    let (status, v) = call_json(&app, "GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["technologies"], 5);
}

#[tokio::test]
async fn ghz_selection_has_no_180nm() {
    let body = json!({ "spec": {
        "required_f_hz": 2_000_000_000u64, "required_voltage_v": 1.2, "die_area_mm2": 4, "volume_forecast": 100000,
        "business_category": "cat2", "market_orientation": "performance_oriented",
    }});
    let (status, v) = call_json(&app(None), "POST", "/v1/select", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<_> = v["candidates"].as_array().unwrap().iter().map(|c| c["technology_id"].clone()).collect();
    assert!(!ids.contains(&json!("tsmc180gp")));
    assert!(ids.contains(&json!("tsmc65")));
}

#[tokio::test]
async fn concurrent_identical_requests_match() {
    let app = app(None);
    let body = production().to_string();
    let mut handles = Vec::new();
    for _ in 0..32 {
        let app = app.clone();
        let body = body.clone();
        handles.push(tokio::spawn(async move { call(&app, "POST", "/v1/estimate/production", Some(&body)).await }));
    }
    let mut bodies = Vec::new();
    for h in handles {
        let (status, bytes) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(bytes);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn static_ui_is_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>explorer</html>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let with_ui = app(Some(dir.path().to_path_buf()));
    let (status, bytes) = call(&with_ui, "GET", "/ui/app.js", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, b"console.log(1)");
    let (status, bytes) = call(&with_ui, "GET", "/ui/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, b"<html>explorer</html>");
    let (status, _) = call(&with_ui, "GET", "/ui/missing.css", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&app(None), "GET", "/ui/app.js", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}


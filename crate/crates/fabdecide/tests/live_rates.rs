use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::routing::get;
use axum::Router;
use fabdecide::rates::{fetch_rates, load_snapshot, RateConfigError, RateMode, RateOrigin, RateService, RateSourceConfig};
use fabdecide_core::{Currency, RateTable};
use rust_decimal::Decimal;

const LIVE: &str = r#"{"as_of": "2024-03-06", "rates": [{"from": "USD", "to": "EGP", "rate": "49.4500000"}]}"#;

async fn serve(body: &'static str, status: u16) -> (String, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let app = Router::new().route(
        "/rates",
        get(move || {
            counter.fetch_add(1, Ordering::SeqCst);
            async move { (axum::http::StatusCode::from_u16(status).unwrap(), body) }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/rates"), hits)
}

fn live(url: &str) -> RateSourceConfig {
    RateSourceConfig { mode: RateMode::Live, live_url: Some(url.into()), timeout_ms: 1000, ..Default::default() }
}

fn usd_egp(t: &RateTable) -> Decimal {
    t.require(Currency::USD, Currency::EGP).unwrap().rate
}

#[tokio::test]
async fn snapshot_mode_uses_the_seed() {
    let view = fetch_rates(&RateSourceConfig::default()).await.unwrap();
    assert_eq!(view.origin, RateOrigin::Snapshot);
    assert_eq!(view.warning, None);
    assert_eq!(usd_egp(&view.table).to_string(), "19.1516000");
}

#[tokio::test]
async fn live_response_replaces_the_table() {
    let (url, hits) = serve(LIVE, 200).await;
    let service = RateService::new(live(&url)).unwrap();
    let view = service.current().await;
    assert_eq!(view.origin, RateOrigin::Live);
    assert_eq!(*view.table, RateTable::from_slice(LIVE.as_bytes()).unwrap());
    assert_eq!(usd_egp(&view.table).to_string(), "49.4500000");
    service.current().await;
    assert_eq!(hits.load(Ordering::SeqCst), 1, "second call is served from cache");
}

#[tokio::test]
async fn expired_cache_refetches() {
    let (url, hits) = serve(LIVE, 200).await;
    let service = RateService::new(RateSourceConfig { cache_ttl_s: 0, ..live(&url) }).unwrap();
    service.current().await;
    service.current().await;
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn unreachable_url_falls_back_with_warning() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let view = fetch_rates(&live(&format!("http://127.0.0.1:{port}/rates"))).await.unwrap();
    assert_eq!(view.origin, RateOrigin::Snapshot);
    assert!(view.warning.is_some());
    assert_eq!(usd_egp(&view.table).to_string(), "19.1516000");
}

#[tokio::test]
async fn bad_responses_fall_back() {
    for (body, status) in [("{\"nope\": 1}", 200), (LIVE, 503)] {
        let (url, _) = serve(body, status).await;
        let view = fetch_rates(&live(&url)).await.unwrap();
        assert_eq!(view.origin, RateOrigin::Snapshot, "{body} {status}");
        assert!(view.warning.unwrap().contains("using snapshot"));
    }
}

#[test]
fn configuration_errors() {
    let missing = RateSourceConfig { mode: RateMode::Live, ..Default::default() };
    assert!(matches!(RateService::new(missing), Err(RateConfigError::MissingLiveUrl)));
    let unreadable = load_snapshot(Some("/nonexistent/rates.json".as_ref()));
    assert!(matches!(unreadable, Err(RateConfigError::Unreadable { .. })));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("rates.json");
    std::fs::write(&bad, "[]").unwrap();
    assert!(matches!(load_snapshot(Some(&bad)), Err(RateConfigError::Invalid { .. })));
}

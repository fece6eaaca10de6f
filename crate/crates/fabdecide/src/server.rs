//! HTTP front end for [`Api`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::api::{self, Api, ApiError, Endpoint};
use crate::rates::{RateService, RateView};

const RATE_SOURCE: HeaderName = HeaderName::from_static("x-rate-source");
const RATE_WARNING: HeaderName = HeaderName::from_static("x-rate-warning");

#[derive(Clone)]
pub struct AppState {
    pub api: Api,
    pub rates: Arc<RateService>,
}

fn json_response(status: StatusCode, body: &Value) -> Response {
    let bytes = serde_json::to_vec(body).expect("JSON values always serialize");
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response()
}

fn respond(result: Result<Value, ApiError>, rates: Option<&RateView>) -> Response {
    let mut response = match result {
        Ok(body) => json_response(StatusCode::OK, &body),
        Err(e) => {
            let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            json_response(status, &e.to_json())
        }
    };
    if let Some(view) = rates {
        let headers = response.headers_mut();
        headers.insert(RATE_SOURCE, HeaderValue::from_static(view.origin.as_str()));
        if let Some(w) = view.warning.as_deref().and_then(|w| HeaderValue::from_str(w).ok()) {
            headers.insert(RATE_WARNING, w);
        }
    }
    response
}

async fn health(State(s): State<AppState>) -> Response {
    let view = s.rates.current().await;
    respond(Ok(api::health_body(s.api.catalog(), &view.table.as_of)), Some(&view))
}

async fn technologies(State(s): State<AppState>, RawQuery(query): RawQuery) -> Response {
    let filters: Vec<String> = form_urlencoded::parse(query.unwrap_or_default().as_bytes())
        .filter(|(k, _)| k == "where")
        .map(|(_, v)| v.into_owned())
        .collect();
    respond(s.api.technologies(&filters), None)
}

async fn technology(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    respond(s.api.technology(&id), None)
}

async fn rates(State(s): State<AppState>) -> Response {
    let view = s.rates.current().await;
    let body = api::rates_body(&view.table, view.origin.as_str(), view.warning.as_deref());
    respond(Ok(body), Some(&view))
}

async fn scenario(s: AppState, endpoint: Endpoint, body: Bytes) -> Response {
    let view = s.rates.current().await;
    respond(s.api.post_json(endpoint, &body, &view.table), Some(&view))
}

async fn not_found() -> Response {
    respond(Err(ApiError::not_found("no such route")), None)
}

/// All `/v1` routes, plus static files under `/ui` when `ui_dir` is set.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/technologies", get(technologies))
        .route("/v1/technologies/{id}", get(technology))
        .route("/v1/rates", get(rates));
    for endpoint in Endpoint::ALL {
        app = app.route(
            endpoint.path(),
            post(move |State(s): State<AppState>, body: Bytes| scenario(s, endpoint, body)),
        );
    }
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.fallback(not_found).with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

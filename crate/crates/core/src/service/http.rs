use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{SuggestRequest, SuggestService};
use crate::error::{Error, Result};
use crate::sim::DeviceType;

/// Environment variable that overrides the listening port.
pub const PORT_ENV: &str = "QAC_PORT";

#[derive(Debug, Deserialize)]
struct SuggestParams {
    prefix: Option<String>,
    device: Option<String>,
    prev: Option<String>,
    limit: Option<usize>,
    month: Option<u8>,
}

fn error_response(e: Error) -> Response {
    let status = match e {
        Error::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        Error::Argument(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    (status, Json(json!({ "error": e.to_string() }))).into_response()
}

async fn suggest(State(service): State<Arc<SuggestService>>, Query(p): Query<SuggestParams>) -> Response {
    let device = match p.device.as_deref().map(str::parse::<DeviceType>) {
        None => DeviceType::DesktopBrowser,
        Some(Ok(d)) => d,
        Some(Err(e)) => return error_response(e),
    };
    let request = SuggestRequest {
        prefix: p.prefix.unwrap_or_default(),
        device_type: device,
        previous_query: p.prev.filter(|s| !s.is_empty()),
        month: p.month,
        limit: p.limit.unwrap_or(10),
    };
    match service.suggest(&request) {
        Ok(r) => Json(r).into_response(),
        Err(e) => error_response(e),
    }
}

async fn healthz(State(service): State<Arc<SuggestService>>) -> Response {
    match service.model_version() {
        Some(v) => Json(json!({ "status": "ok", "model_version": v })).into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "unavailable", "model_version": null })),
        )
            .into_response(),
    }
}

async fn reload(State(service): State<Arc<SuggestService>>) -> Response {
    let s = service.clone();
    match tokio::task::spawn_blocking(move || s.reload()).await {
        Ok(Ok(v)) => Json(json!({ "status": "reloaded", "model_version": v })).into_response(),
        Ok(Err(e)) => error_response(e),
        Err(e) => error_response(Error::Unavailable(e.to_string())),
    }
}

/// `GET /suggest`, `GET /healthz` and `POST /reload`.
pub fn router(service: Arc<SuggestService>) -> Router {
    Router::new()
        .route("/suggest", get(suggest))
        .route("/healthz", get(healthz))
        .route("/reload", post(reload))
        .with_state(service)
}

/// Serve until ctrl-c.
pub async fn serve(service: Arc<SuggestService>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

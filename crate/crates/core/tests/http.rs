use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use qac_core::features::{FeatureLayout, ScalerStats};
use qac_core::index::PrefixIndex;
use qac_core::ranker::{Network, RankerModel};
use qac_core::service::router;
use qac_core::service::{Snapshot, SuggestService};
use qac_core::sim::QueryRecord;
use serde_json::Value;

fn loaded() -> SuggestService {
    let index = PrefixIndex::build(vec![
        QueryRecord::new("black leather jacket", 0.9, 0, 0),
        QueryRecord::new("black leather boots", 0.5, 1, 0),
        QueryRecord::new("blue jeans", 0.7, 1, 1),
    ])
    .unwrap();
    let layout = FeatureLayout::for_catalog(index.catalog());
    // ln(popularity) passed straight through
    let mut layers = Network::init(layout.dim(), &[], 0).unwrap().layers().to_vec();
    layers[0].weights.fill(0.0);
    layers[0].weights[[0, 0]] = 1.0;
    let network = Network::from_layers(layers).unwrap();
    let model = RankerModel::new(network, ScalerStats::identity(layout)).unwrap();
    SuggestService::new(Snapshot::new(index, model).unwrap())
}

/// Serve on an ephemeral port for the lifetime of the returned runtime.
fn start(service: SuggestService) -> (tokio::runtime::Runtime, u16) {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let port = listener.local_addr().unwrap().port();
    rt.spawn(async move {
        axum::serve(listener, router(Arc::new(service))).await.unwrap();
    });
    (rt, port)
}

fn request(port: u16, method: &str, target: &str) -> (u16, Value) {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(stream, "{method} {target} HTTP/1.1\r\nHost: localhost\r\nContent-Length: 0\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status: u16 = raw[9..12].parse().unwrap();
    let body = &raw[raw.find("\r\n\r\n").unwrap() + 4..];
    (status, serde_json::from_str(body).unwrap_or(Value::Null))
}

#[test]
fn suggest_endpoint_ranks_and_limits() {
    let (_rt, port) = start(loaded());
    let (status, body) = request(port, "GET", "/suggest?prefix=bl&device=ios_app&limit=2");
    assert_eq!(status, 200);
    let list = body["suggestions"].as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["text"], "black leather jacket");
    assert_eq!(list[1]["text"], "blue jeans");
    assert!((list[0]["score"].as_f64().unwrap() - 0.9f64.ln()).abs() < 1e-12);
    assert_eq!(list[0]["is_exact_match"], true);
    assert!(body["model_version"].as_str().unwrap().len() == 12);
    assert!(body["latency_micros"].is_u64());

    let (status, body) = request(port, "GET", "/suggest?prefix=Black%20L&prev=blue%20jeans&month=3");
    assert_eq!(status, 200);
    assert_eq!(body["suggestions"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_requests_are_400() {
    let (_rt, port) = start(loaded());
    for target in [
        "/suggest",
        "/suggest?prefix=",
        "/suggest?prefix=bl&device=fridge",
        "/suggest?prefix=bl&limit=0",
        "/suggest?prefix=bl&limit=51",
        "/suggest?prefix=bl&month=13",
    ] {
        let (status, body) = request(port, "GET", target);
        assert_eq!(status, 400, "{target}");
        assert!(body["error"].is_string(), "{target}");
    }
}

#[test]
fn health_reports_model_version() {
    let service = loaded();
    let version = service.model_version().unwrap();
    let (_rt, port) = start(service);
    let (status, body) = request(port, "GET", "/healthz");
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model_version"], version.as_str());
}

#[test]
fn empty_service_is_unavailable() {
    let (_rt, port) = start(SuggestService::default());
    assert_eq!(request(port, "GET", "/healthz").0, 503);
    assert_eq!(request(port, "GET", "/suggest?prefix=bl").0, 503);
    // nothing to reload from
    assert_ne!(request(port, "POST", "/reload").0, 200);
}

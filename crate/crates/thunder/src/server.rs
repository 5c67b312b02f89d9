//! The HTTP server: every request is handed to [`Platform::handle`] under
//! one lock, so state changes are serialized.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use thunder_core::{ApiRequest, ApiResponse, Emulator, LevelRegistry, MetadataMode, Platform};

pub type Shared = Arc<Mutex<Platform>>;

/// A fresh platform with the shipped levels. `addr` is added to the hosts
/// that handler `fetch` treats as the API.
pub fn platform(addr: &str, mode: MetadataMode) -> Platform {
    let emulator = Emulator::builder().metadata_mode(mode).api_host(addr).build();
    Platform::new(emulator, LevelRegistry::shipped())
}

pub fn router(state: Shared) -> Router {
    Router::new().fallback(handle).with_state(state)
}

fn to_api_request(method: &Method, uri: &Uri, headers: &HeaderMap, body: Bytes) -> ApiRequest {
    let pq = uri.path_and_query().map(|pq| pq.as_str()).unwrap_or("/");
    let headers = headers
        .iter()
        .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
        .collect();
    ApiRequest::new(method.as_str(), pq)
        .with_headers(headers)
        .with_body(body.to_vec())
}

fn to_response(resp: ApiResponse) -> Response {
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        [(header::CONTENT_TYPE, resp.content_type)],
        Body::from(resp.body),
    )
        .into_response()
}

async fn handle(State(state): State<Shared>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let req = to_api_request(&method, &uri, &headers, body);
    let result = tokio::task::spawn_blocking(move || {
        let mut platform = state.lock().unwrap_or_else(|e| e.into_inner());
        platform.handle(&req)
    })
    .await;
    match result {
        Ok(resp) => to_response(resp),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves on a background thread with its own runtime.
/// Returns the bound address. Used by tests and embedders.
pub fn spawn(addr: &str, state: Shared) -> std::io::Result<SocketAddr> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let local = std_listener.local_addr()?;
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("runtime builds");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener converts");
            let _ = serve(listener, state, std::future::pending()).await;
        });
    });
    Ok(local)
}

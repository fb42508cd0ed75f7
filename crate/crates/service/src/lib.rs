//! Stateless HTTP facade: solve, imply and validate over JSON.
//!
//! Every handler is a pure function of its request body, so identical
//! requests produce byte-identical responses.

use std::net::SocketAddr;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Request};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use payoff_forge_core::formats::FormatError;
use payoff_forge_core::pipeline::{ImplyRequest, SolveRequest, ValidateRequest, VERSION};
use payoff_forge_core::ProductSpecFile;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

/// Largest accepted request body.
pub const BODY_LIMIT: usize = 1 << 20;
/// Largest accepted mesh, in buckets.
pub const MAX_BUCKETS: usize = 100_000;
pub const BIND_ENV: &str = "PAYOFF_FORGE_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8787";

/// Error half of every handler.
#[derive(Debug)]
pub enum ApiError {
    Malformed(String),
    Domain(String),
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::Malformed(_) => StatusCode::BAD_REQUEST,
            ApiError::Domain(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> Self {
        ApiError::Domain(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let (kind, message) = match self {
            ApiError::Malformed(m) => ("malformed", m),
            ApiError::Domain(m) => ("domain", m),
            ApiError::Internal(m) => ("internal", m),
        };
        json_response(
            status,
            &json!({ "error": { "kind": kind, "message": message } }),
        )
    }
}

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => (
            status,
            [(header::CONTENT_TYPE, "application/json")],
            Body::from(bytes),
        )
            .into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

fn check_size(product: &ProductSpecFile) -> Result<(), ApiError> {
    let buckets = product.mesh.len().saturating_sub(1);
    if buckets > MAX_BUCKETS {
        return Err(ApiError::Domain(format!(
            "mesh has {buckets} buckets; the limit is {MAX_BUCKETS}"
        )));
    }
    Ok(())
}

/// Runs a computation off the async workers; a panic becomes a 500.
async fn compute<T, F>(work: F) -> Result<Response, ApiError>
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, FormatError> + Send + 'static,
{
    match tokio::task::spawn_blocking(work).await {
        Ok(Ok(body)) => Ok(json_response(StatusCode::OK, &body)),
        Ok(Err(e)) => Err(e.into()),
        Err(e) => Err(ApiError::Internal(if e.is_panic() {
            "internal error while computing the response".to_string()
        } else {
            e.to_string()
        })),
    }
}

async fn solve(body: Bytes) -> Result<Response, ApiError> {
    let request: SolveRequest = parse(&body)?;
    check_size(&request.product)?;
    compute(move || request.run()).await
}

async fn imply(body: Bytes) -> Result<Response, ApiError> {
    let request: ImplyRequest = parse(&body)?;
    check_size(&request.product)?;
    compute(move || request.run()).await
}

async fn validate(body: Bytes) -> Result<Response, ApiError> {
    let request: ValidateRequest = parse(&body)?;
    check_size(&request.product)?;
    compute(move || request.run()).await
}

async fn health() -> Response {
    json_response(
        StatusCode::OK,
        &json!({ "status": "ok", "version": VERSION }),
    )
}

async fn log_request(request: Request, next: Next) -> Response {
    let started = Instant::now();
    let method = request.method().to_string();
    let path = request.uri().path().to_string();
    let response = next.run(request).await;
    eprintln!(
        "{}",
        json!({
            "method": method,
            "path": path,
            "status": response.status().as_u16(),
            "micros": started.elapsed().as_micros() as u64,
        })
    );
    response
}

pub fn router() -> Router {
    Router::new()
        .route("/v1/solve", post(solve))
        .route("/v1/imply-risk-aversion", post(imply))
        .route("/v1/validate", post(validate))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(middleware::from_fn(log_request))
}

/// The `--bind` value wins over the environment, which wins over the default.
pub fn resolve_bind(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(BIND_ENV).ok().filter(|v| !v.is_empty()))
        .unwrap_or_else(|| DEFAULT_BIND.to_string())
}

/// Serves until interrupted.
pub async fn serve(bind: &str) -> std::io::Result<()> {
    let addr: SocketAddr = bind.parse().map_err(|e| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("bad bind address {bind:?}: {e}"),
        )
    })?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "{}",
        json!({ "event": "listening", "addr": listener.local_addr()?.to_string(), "version": VERSION })
    );
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

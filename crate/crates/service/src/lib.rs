//! HTTP/JSON session service for interactive curation.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/sessions` | [`CreateSession`] | [`CreateResponse`] |
//! | GET | `/sessions/{id}` | | [`SessionView`] |
//! | GET | `/sessions/{id}/candidates` | | [`BatchView`] |
//! | POST | `/sessions/{id}/preferences` | [`PreferenceRequest`] | [`PreferenceResponse`] |
//! | POST | `/sessions/{id}/next-batch` | | [`BatchView`] |
//! | GET | `/sessions/{id}/posterior?full_cov=true` | | posterior snapshot |
//! | POST | `/sessions/{id}/close` | | [`SessionView`] |
//!
//! Errors are `{code, message}` with status 400, 404, 409 or 422. Batches
//! are produced by the diversified search on `Y` plus the posterior mean of
//! the qualitative desirability.

pub mod error;
pub mod session;
pub mod store;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{FromRequest, Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

pub use error::{ApiError, ErrorBody};
pub use session::{
    BatchView, Candidate, CreateResponse, CreateSession, Event, GeneratorSettings, PreferenceRequest,
    PreferenceResponse, Session, SessionView, Status,
};
pub use store::{SessionFile, Store};

/// JSON body extractor whose rejections use the service error shape.
#[derive(FromRequest)]
#[from_request(via(Json), rejection(ApiError))]
struct Body<T>(T);

type Shared = Arc<Store>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create(State(store): State<Shared>, Body(req): Body<CreateSession>) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let resp = blocking(move || {
        let session = Session::create(store::new_session_id(), req)?;
        let resp = session.create_response();
        store.insert(session)?;
        Ok(resp)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn show(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    blocking(move || store.read(&id, Session::view)).await.map(Json)
}

async fn candidates(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<BatchView>, ApiError> {
    blocking(move || store.read(&id, Session::latest_batch)).await.map(Json)
}

async fn preferences(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Body(req): Body<PreferenceRequest>,
) -> Result<Json<PreferenceResponse>, ApiError> {
    blocking(move || store.mutate(&id, |s| s.submit(req))).await.map(Json)
}

async fn next_batch(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<BatchView>, ApiError> {
    blocking(move || store.mutate(&id, Session::next_batch)).await.map(Json)
}

#[derive(Debug, Default, Deserialize)]
struct PosteriorQuery {
    #[serde(default)]
    full_cov: bool,
}

async fn posterior(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PosteriorQuery>,
) -> Result<Json<curate::preference::PosteriorSnapshot>, ApiError> {
    blocking(move || store.read(&id, |s| s.snapshot(q.full_cov))).await.map(Json)
}

async fn close(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    blocking(move || store.mutate(&id, |s| s.close().map(|_| s.view()))).await.map(Json)
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/candidates", get(candidates))
        .route("/sessions/{id}/preferences", post(preferences))
        .route("/sessions/{id}/next-batch", post(next_batch))
        .route("/sessions/{id}/posterior", get(posterior))
        .route("/sessions/{id}/close", post(close))
        .fallback(fallback)
        .with_state(store)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(addr: SocketAddr, store: Arc<Store>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking entry point: opens the store and runs [`serve`] on a fresh
/// runtime with `threads` workers (0 means one per core).
pub fn run(addr: SocketAddr, data_dir: Option<&Path>, threads: usize) -> Result<(), Box<dyn std::error::Error>> {
    let store = match data_dir {
        Some(d) => Store::open(d)?,
        None => Store::in_memory(),
    };
    if !store.is_empty() {
        eprintln!("restored {} session(s)", store.len());
    }
    let mut builder = tokio::runtime::Builder::new_multi_thread();
    builder.enable_all();
    if threads > 0 {
        builder.worker_threads(threads);
    }
    builder.build()?.block_on(serve(addr, Arc::new(store)))?;
    Ok(())
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
pub struct ServiceChapter;

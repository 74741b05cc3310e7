//! HTTP surface: ingestion, slide concepts, DNU marking, question
//! answering, PKG views, and citation source lookup.
//!
//! Handlers hop to the blocking pool because the pipelines underneath make
//! synchronous provider calls. Errors come back as
//! `{error: {code, message}}` with the engine-assigned status.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{Engine, EngineError};

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/materials", post(ingest_material).get(list_materials))
        .route("/materials/{id}/slides/{n}", get(slide_text))
        .route("/materials/{id}/slides/{n}/concepts", get(slide_concepts))
        .route("/materials/{id}/slides/{n}/ask", post(ask_freeform))
        .route(
            "/materials/{id}/sources/{article}/{paragraph}",
            get(source_text),
        )
        .route("/learners/{lid}/dnu", post(mark_dnu))
        .route("/learners/{lid}/pkg", get(learner_pkg))
        .route("/questions/{qid}/answer", post(answer_question))
        .with_state(engine)
}

fn error_response(e: EngineError) -> Response {
    let status = StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = json!({
        "error": { "code": e.code(), "message": e.to_string(), "details": null }
    });
    (status, Json(body)).into_response()
}

async fn run_blocking<T, F>(f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, EngineError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(value)) => (StatusCode::OK, Json(value)).into_response(),
        Ok(Err(e)) => error_response(e),
        Err(join) => error_response(EngineError::Internal(format!("task panicked: {join}"))),
    }
}

async fn ingest_material(State(engine): State<Arc<Engine>>, body: Bytes) -> Response {
    run_blocking(move || engine.ingest_deck(&body)).await
}

async fn list_materials(State(engine): State<Arc<Engine>>) -> Response {
    run_blocking(move || Ok(json!({ "materials": engine.material_summaries() }))).await
}

async fn slide_text(
    State(engine): State<Arc<Engine>>,
    Path((id, n)): Path<(String, usize)>,
) -> Response {
    run_blocking(move || engine.slide(&id, n)).await
}

async fn slide_concepts(
    State(engine): State<Arc<Engine>>,
    Path((id, n)): Path<(String, usize)>,
) -> Response {
    run_blocking(move || {
        engine
            .slide_concepts(&id, n)
            .map(|c| json!({ "main_concepts": c }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct DnuBody {
    material_id: String,
    slide_index: usize,
    concept_id: String,
}

async fn mark_dnu(
    State(engine): State<Arc<Engine>>,
    Path(lid): Path<String>,
    Json(body): Json<DnuBody>,
) -> Response {
    run_blocking(move || {
        engine.mark_dnu(&lid, &body.material_id, body.slide_index, &body.concept_id)
    })
    .await
}

async fn answer_question(State(engine): State<Arc<Engine>>, Path(qid): Path<String>) -> Response {
    run_blocking(move || engine.answer(&qid)).await
}

#[derive(Debug, Deserialize)]
struct AskBody {
    question: String,
}

async fn ask_freeform(
    State(engine): State<Arc<Engine>>,
    Path((id, n)): Path<(String, usize)>,
    Json(body): Json<AskBody>,
) -> Response {
    run_blocking(move || engine.ask(&id, n, &body.question)).await
}

#[derive(Debug, Deserialize)]
struct PkgQuery {
    material: String,
}

async fn learner_pkg(
    State(engine): State<Arc<Engine>>,
    Path(lid): Path<String>,
    Query(query): Query<PkgQuery>,
) -> Response {
    run_blocking(move || engine.pkg(&lid, &query.material)).await
}

async fn source_text(
    State(engine): State<Arc<Engine>>,
    Path((id, article, paragraph)): Path<(String, String, String)>,
) -> Response {
    run_blocking(move || engine.source_text(&id, &article, &paragraph)).await
}

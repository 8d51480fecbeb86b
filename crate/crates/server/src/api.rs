use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use soppia_core::sensitivity::MarginalContribution;
use soppia_core::{
    assess, complete_via_model, marginal_contributions, parse_response, render_prompt, render_report_text,
    score_case, validate_schema, weight_sweep, what_if, CaseFile, CaseStore, CriteriaSchema, ListFilter,
    ParsedResponse, PromptDocument, RecordKind, ReportFormat, SchemaError, SchemaRef, SweepPoint, WhatIfDelta,
};

use crate::error::{ok, parse_body, ApiError};
use crate::AppState;

type Shared = Arc<AppState>;

pub(crate) fn routes(state: Shared) -> Router {
    Router::new()
        .route("/api/schema", get(get_schema).put(put_schema))
        .route("/api/assess", post(post_assess))
        .route("/api/whatif", post(post_whatif))
        .route("/api/sensitivity", post(post_sensitivity))
        .route("/api/report/render", post(post_report_render))
        .route("/api/prompt/render", post(post_prompt_render))
        .route("/api/prompt/parse", post(post_prompt_parse))
        .route("/api/prompt/complete", post(post_prompt_complete))
        .route("/api/cases", get(list_cases).post(post_case))
        .route("/api/cases/{id}", get(get_case))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "no such endpoint") })
        .with_state(state)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssessRequest {
    pub case: CaseFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub case: CaseFile,
    #[serde(default)]
    pub delta: WhatIfDelta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRequest {
    pub case: CaseFile,
    #[serde(default)]
    pub criterion_id: Option<String>,
    #[serde(default)]
    pub weight_grid: Option<Vec<Decimal>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub contributions: Vec<MarginalContribution>,
    pub sweep: Option<Vec<SweepPoint>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRenderRequest {
    pub case: CaseFile,
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportText {
    pub format: ReportFormat,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderRequest {
    pub facts: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompleteRequest {
    pub facts: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub prompt: PromptDocument,
    pub raw: String,
    pub parsed: ParsedResponse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSaved {
    pub schema_ref: SchemaRef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSaved {
    pub record_id: String,
    pub revision: u64,
    pub schema_ref: SchemaRef,
    /// Revision of the stored result; absent while the case is incomplete.
    pub result_revision: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
struct ListQuery {
    schema_id: Option<String>,
    prefix: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct RevisionQuery {
    revision: Option<u64>,
}

async fn with_store<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&CaseStore) -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn get_schema(State(state): State<Shared>) -> Response {
    ok(&*state.active().schema)
}

async fn put_schema(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let schema: CriteriaSchema = parse_body(&body)?;
    let violations = validate_schema(&schema);
    if !violations.is_empty() {
        return Err(SchemaError::Invalid(violations).into());
    }
    let stored = schema.clone();
    let revision = with_store(&state, move |store| Ok(store.save_schema(&stored)?)).await?;
    state.set_active(schema, revision);
    Ok(ok(&SchemaSaved {
        schema_ref: state.active().schema_ref,
    }))
}

async fn post_assess(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: AssessRequest = parse_body(&body)?;
    Ok(ok(&assess(&state.active().schema, &req.case)?))
}

async fn post_whatif(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: WhatIfRequest = parse_body(&body)?;
    Ok(ok(&what_if(&state.active().schema, &req.case, &req.delta)?))
}

async fn post_sensitivity(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: SensitivityRequest = parse_body(&body)?;
    let schema = state.active().schema;
    let contributions = marginal_contributions(&schema, &req.case)?;
    let sweep = match (&req.criterion_id, &req.weight_grid) {
        (Some(id), Some(grid)) => Some(weight_sweep(&schema, &req.case, id, grid)?),
        (None, None) => None,
        (None, Some(_)) => {
            return Err(ApiError::unprocessable(
                "missing_field",
                "weight_grid requires criterion_id",
                Some("criterion_id".into()),
            ))
        }
        (Some(_), None) => {
            return Err(ApiError::unprocessable(
                "missing_field",
                "criterion_id requires weight_grid",
                Some("weight_grid".into()),
            ))
        }
    };
    Ok(ok(&SensitivityReport { contributions, sweep }))
}

async fn post_report_render(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: ReportRenderRequest = parse_body(&body)?;
    let result = assess(&state.active().schema, &req.case)?;
    Ok(ok(&ReportText {
        format: req.format,
        text: render_report_text(&result.report, req.format),
    }))
}

async fn post_prompt_render(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: RenderRequest = parse_body(&body)?;
    Ok(ok(&render_prompt(&state.active().schema, &req.facts)?))
}

async fn post_prompt_parse(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: ParseRequest = parse_body(&body)?;
    Ok(ok(&parse_response(&req.text, &state.active().schema)?))
}

async fn post_prompt_complete(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let Some(endpoint) = state.llm.clone() else {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "llm_not_configured",
            "no completion endpoint is configured",
        ));
    };
    let req: CompleteRequest = parse_body(&body)?;
    let schema = state.active().schema;
    let prompt = render_prompt(&schema, &req.facts)?;
    let sent = prompt.clone();
    let raw = tokio::task::spawn_blocking(move || complete_via_model(&sent, &endpoint))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let parsed = parse_response(&raw, &schema).map_err(|e| {
        ApiError::new(StatusCode::BAD_GATEWAY, "unparseable_upstream", format!("model response: {e}"))
    })?;
    Ok(ok(&CompleteResponse { prompt, raw, parsed }))
}

async fn post_case(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: AssessRequest = parse_body(&body)?;
    let active = state.active();
    req.case.validate().map_err(|e| ApiError::from(soppia_core::AssessError::from(e)))?;
    let breakdown = score_case(&active.schema, &req.case).map_err(soppia_core::AssessError::from)?;
    let result = if breakdown.complete {
        Some(assess(&active.schema, &req.case)?)
    } else {
        None
    };
    let schema_ref = active.schema_ref.clone();
    let saved = with_store(&state, move |store| {
        let revision = store.save_case(&req.case, schema_ref.clone())?;
        let result_revision = match &result {
            Some(r) => Some(store.save_result(&req.case.case_id, r, schema_ref.clone())?),
            None => None,
        };
        Ok(CaseSaved {
            record_id: req.case.case_id.clone(),
            revision,
            schema_ref,
            result_revision,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, ok(&saved)).into_response())
}

async fn list_cases(State(state): State<Shared>, Query(q): Query<ListQuery>) -> Result<Response, ApiError> {
    let filter = ListFilter {
        schema_id: q.schema_id,
        id_prefix: q.prefix,
    };
    let summaries = with_store(&state, move |store| Ok(store.list(RecordKind::Case, &filter)?)).await?;
    Ok(ok(&summaries))
}

async fn get_case(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RevisionQuery>,
) -> Result<Response, ApiError> {
    let record = with_store(&state, move |store| Ok(store.load(RecordKind::Case, &id, q.revision)?)).await?;
    Ok(ok(&record))
}

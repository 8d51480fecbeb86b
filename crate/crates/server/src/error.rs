use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use soppia_core::{canonicalize, AssessError, CompletionError, PromptError, SchemaError, SensitivityError, StoreError};

/// Body of every response: `data` on success, `error` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>, field: Option<String>) -> Self {
        Self {
            field,
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

pub(crate) fn envelope_response(status: StatusCode, envelope: &ApiEnvelope) -> Response {
    let body = canonicalize(envelope).expect("envelope serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

pub(crate) fn ok<T: Serialize>(data: &T) -> Response {
    match serde_json::to_value(data) {
        Ok(value) => envelope_response(
            StatusCode::OK,
            &ApiEnvelope {
                ok: true,
                data: Some(value),
                error: None,
            },
        ),
        Err(e) => ApiError::internal(e.to_string()).into_response(),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        envelope_response(
            self.status,
            &ApiEnvelope {
                ok: false,
                data: None,
                error: Some(ErrorBody {
                    code: self.code.to_owned(),
                    message: self.message,
                    field: self.field,
                }),
            },
        )
    }
}

/// Decodes a request body, reporting the JSON path of the first bad field.
pub(crate) fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            let field = (path != ".").then_some(path);
            ApiError::unprocessable("invalid_request", inner.to_string(), field)
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", inner.to_string())
        }
    })?;
    de.end()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string()))?;
    Ok(value)
}

impl From<AssessError> for ApiError {
    fn from(e: AssessError) -> Self {
        if e.is_internal() {
            return ApiError::internal(e.to_string());
        }
        ApiError::unprocessable(e.code(), e.to_string(), e.field())
    }
}

impl From<SensitivityError> for ApiError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Assess(inner) => inner.into(),
            other => ApiError::unprocessable(other.code(), other.to_string(), other.field()),
        }
    }
}

impl From<PromptError> for ApiError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::EmptyFacts => ApiError::unprocessable("empty_facts", e.to_string(), Some("facts".into())),
            PromptError::Unparseable => {
                ApiError::unprocessable("unparseable_response", e.to_string(), Some("text".into()))
            }
        }
    }
}

impl From<SchemaError> for ApiError {
    fn from(e: SchemaError) -> Self {
        match &e {
            SchemaError::Parse(_) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string()),
            SchemaError::Invalid(violations) => {
                let message = violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; ");
                ApiError::unprocessable("invalid_schema", message, violations.first().map(|v| v.field.clone()))
            }
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::NotFound { .. } => ApiError::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Validation { field, .. } => {
                let field = Some(field.clone()).filter(|f| !f.is_empty());
                ApiError::unprocessable("validation_error", e.to_string(), field)
            }
            StoreError::Storage(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string())
            }
        }
    }
}

impl From<CompletionError> for ApiError {
    fn from(e: CompletionError) -> Self {
        let code = match e {
            CompletionError::Timeout(_) => "upstream_timeout",
            CompletionError::Auth(_) => "upstream_auth",
            _ => "upstream_error",
        };
        ApiError::new(StatusCode::BAD_GATEWAY, code, e.to_string())
    }
}

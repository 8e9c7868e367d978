use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emm_core::ErrorCategory;
use serde::Serialize;
use serde_json::Value;

/// Uniform error envelope: `{category, message, details}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub category: ErrorCategory,
    pub message: String,
    pub details: Value,
}

#[derive(Serialize)]
struct Envelope<'a> {
    category: ErrorCategory,
    message: &'a str,
    details: &'a Value,
}

impl ApiError {
    pub fn new(category: ErrorCategory, message: impl Into<String>) -> Self {
        Self { category, message: message.into(), details: Value::Null }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorCategory::Usage, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCategory::NotFound, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCategory::Validation, message)
    }

    pub fn status(&self) -> StatusCode {
        status_of(self.category)
    }
}

pub fn status_of(category: ErrorCategory) -> StatusCode {
    match category {
        ErrorCategory::Usage => StatusCode::BAD_REQUEST,
        ErrorCategory::NotFound => StatusCode::NOT_FOUND,
        ErrorCategory::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCategory::Conflict => StatusCode::CONFLICT,
        ErrorCategory::Io => StatusCode::INTERNAL_SERVER_ERROR,
        ErrorCategory::Oracle => StatusCode::BAD_GATEWAY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Envelope { category: self.category, message: &self.message, details: &self.details };
        (self.status(), Json(body)).into_response()
    }
}

impl From<emm_core::Error> for ApiError {
    fn from(e: emm_core::Error) -> Self {
        ApiError::new(e.category(), e.to_string())
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                emm_core::Error::from(e).into()
            }
        }
    )*};
}

via_core!(
    emm_core::elicitation::SessionError,
    emm_core::hierarchy::HierarchyError,
    emm_core::persistence::PersistenceError,
    emm_core::aggregation::AggregationError,
    std::io::Error
);

pub type ApiResult<T> = Result<T, ApiError>;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mealmind::domain::ValidationReport;
use mealmind::explain::ExplainError;
use mealmind::gateway::GatewayError;
use mealmind::session::SessionError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Wire shape of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into(), details: Value::Null } }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} '{id}'"))
            .with_details(json!({ "kind": what, "id": id }))
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn validation(report: &ValidationReport) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", report.to_string())
            .with_details(json!({ "issues": report.issues }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), "invalid_body", r.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NoRecipeSatisfiesRules => {
                ApiError::new(StatusCode::CONFLICT, "no_recipe_satisfies_rules", e.to_string())
            }
            SessionError::InvalidTopK(k) => {
                ApiError::bad_request("invalid_top_k", e.to_string()).with_details(json!({ "top_k": k }))
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        let message = e.to_string();
        match e {
            ExplainError::Backend(GatewayError::UnknownBackend { id, available }) => {
                ApiError::bad_request("unknown_backend", message)
                    .with_details(json!({ "backend_id": id, "available": available }))
            }
            ExplainError::Backend(_) => ApiError::bad_request("invalid_backend", message),
            ExplainError::InvalidTopK => ApiError::bad_request("invalid_top_k", message),
            ExplainError::MissingContrast | ExplainError::UnexpectedContrast | ExplainError::SameRecipe(_) => {
                ApiError::bad_request("style_contrast_mismatch", message)
            }
            ExplainError::ProfileMismatch { session, requested } => ApiError::bad_request("profile_mismatch", message)
                .with_details(json!({ "session_profile_id": session, "profile_id": requested })),
            ExplainError::NotRecommended(id) => {
                ApiError::bad_request("not_recommended", message).with_details(json!({ "recipe_id": id }))
            }
            ExplainError::UnknownRecipe(id) => ApiError::not_found("recipe", &id),
            ExplainError::Generation(_) => ApiError::new(StatusCode::BAD_GATEWAY, "generation_failed", message),
            ExplainError::Prompt(_) | ExplainError::Shap(_) | ExplainError::Schema(_) => ApiError::internal(message),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_backend_lists_alternatives() {
        let e: ApiError = ExplainError::Backend(GatewayError::UnknownBackend {
            id: "nope".into(),
            available: vec!["deterministic".into(), "gpt-4".into()],
        })
        .into();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        assert_eq!(e.body.code, "unknown_backend");
        assert_eq!(e.body.details["available"], json!(["deterministic", "gpt-4"]));
        assert!(e.body.message.contains("deterministic, gpt-4"));
    }

    #[test]
    fn status_mapping() {
        assert_eq!(ApiError::from(SessionError::NoRecipeSatisfiesRules).status, StatusCode::CONFLICT);
        assert_eq!(ApiError::from(SessionError::InvalidTopK(0)).status, StatusCode::BAD_REQUEST);
        assert_eq!(ApiError::from(ExplainError::MissingContrast).status, StatusCode::BAD_REQUEST);
        assert_eq!(ApiError::from(ExplainError::UnknownRecipe("x".into())).status, StatusCode::NOT_FOUND);
        assert_eq!(ApiError::from(ExplainError::Generation(GatewayError::Timeout)).status, StatusCode::BAD_GATEWAY);
    }
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use otf_core::api::ErrorBody;

/// An HTTP error with a JSON `{error, field?}` body.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{status}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    /// Maps a JSON decoding failure to a 400, naming the offending field
    /// when serde reports one.
    pub fn from_json(e: &serde_json::Error) -> Self {
        let msg = e.to_string();
        let field = ["unknown field `", "missing field `", "unknown variant `"]
            .iter()
            .find_map(|p| {
                let start = msg.find(p)? + p.len();
                let end = start + msg[start..].find('`')?;
                Some(msg[start..end].to_string())
            });
        let mut err = Self::bad_request(format!("invalid request body: {msg}"));
        if let Some(f) = field.filter(|_| !msg.contains("unknown variant")) {
            err = err.with_field(f);
        }
        err
    }
}

impl From<otf_core::Error> for ApiError {
    fn from(e: otf_core::Error) -> Self {
        use otf_core::Error as E;
        let status = match e {
            E::Dimension { .. }
            | E::UnsupportedObjective { .. }
            | E::InvalidArgument(_)
            | E::Config { .. }
            | E::Pairing { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
            field: e.field().map(String::from),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            field: self.field,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

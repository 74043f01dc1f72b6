//! Async client for the tuning service.

use std::time::Duration;

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use otf_core::api::{
    Action, ControlRequest, ControlResponse, CreateRunRequest, ErrorBody, EventsPage, ObjectiveInfo, ParamAck,
    ParamRequest, RunInfo,
};
use otf_core::harness::RunRecord;
use otf_core::live::{Event, Param, RunState};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server answered {status}: {}", body.error)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("run did not finish within {0:?}")]
    Timeout(Duration),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status(),
            ClientError::Timeout(_) => None,
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => body.field.as_deref(),
            _ => None,
        }
    }
}

pub type Result<T, E = ClientError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            error: text,
            field: None,
        });
        Err(ClientError::Api { status, body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::decode(self.http.post(self.url(path)).json(body).send().await?).await
    }

    pub async fn objectives(&self) -> Result<Vec<ObjectiveInfo>> {
        self.get("/api/objectives").await
    }

    pub async fn create_run(&self, request: &CreateRunRequest) -> Result<RunInfo> {
        self.post("/api/runs", request).await
    }

    pub async fn list_runs(&self) -> Result<Vec<RunInfo>> {
        self.get("/api/runs").await
    }

    pub async fn run(&self, id: &str) -> Result<RunInfo> {
        self.get(&format!("/api/runs/{id}")).await
    }

    pub async fn control(&self, id: &str, action: Action) -> Result<RunState> {
        let r: ControlResponse = self
            .post(&format!("/api/runs/{id}/control"), &ControlRequest { action })
            .await?;
        Ok(r.state)
    }

    pub async fn adjust(&self, id: &str, parameter: Param, value: f64) -> Result<ParamAck> {
        self.adjust_named(id, parameter.as_str(), value).await
    }

    /// Like [`Client::adjust`] but with a free-form parameter name.
    pub async fn adjust_named(&self, id: &str, parameter: &str, value: f64) -> Result<ParamAck> {
        let body = ParamRequest {
            parameter: parameter.to_string(),
            value,
        };
        self.post(&format!("/api/runs/{id}/params"), &body).await
    }

    pub async fn events(&self, id: &str, cursor: u64) -> Result<EventsPage> {
        self.get(&format!("/api/runs/{id}/events?cursor={cursor}")).await
    }

    pub async fn record(&self, id: &str) -> Result<RunRecord> {
        self.get(&format!("/api/runs/{id}/record")).await
    }

    /// Polls from cursor 0 until the run is terminal and the log is drained.
    pub async fn follow(&self, id: &str, interval: Duration, timeout: Duration) -> Result<Vec<Event>> {
        let deadline = tokio::time::Instant::now() + timeout;
        let mut cursor = 0;
        let mut events = Vec::new();
        let mut terminal = false;
        loop {
            let page = self.events(id, cursor).await?;
            let drained = page.events.is_empty();
            cursor = page.next_cursor;
            events.extend(page.events);
            if !drained {
                continue;
            }
            // Terminal state is set together with the final event, so one
            // more empty page after observing it means the log is complete.
            if terminal {
                return Ok(events);
            }
            if self.run(id).await?.state.is_terminal() {
                terminal = true;
                continue;
            }
            if tokio::time::Instant::now() >= deadline {
                return Err(ClientError::Timeout(timeout));
            }
            tokio::time::sleep(interval).await;
        }
    }
}

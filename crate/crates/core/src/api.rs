//! JSON bodies exchanged with the tuning service.

use serde::{Deserialize, Serialize};

use crate::config::{AlgoConfig, Algorithm, RunParams};
use crate::live::{Event, RunState, Summary};
use crate::objectives::ObjectiveId;

/// Most events returned by one poll.
pub const MAX_EVENT_BATCH: usize = 1000;
pub const DEFAULT_TICK_MS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRunRequest {
    pub algorithm: Algorithm,
    /// Defaults to the algorithm's paired objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveId>,
    #[serde(default)]
    pub config: RunParams,
    #[serde(default)]
    pub seed: u64,
    /// Artificial delay per iteration; the server default applies when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick_ms: Option<u64>,
}

impl CreateRunRequest {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            objective: None,
            config: RunParams::default(),
            seed,
            tick_ms: None,
        }
    }

    pub fn objective(&self) -> ObjectiveId {
        self.objective.unwrap_or_else(|| self.algorithm.default_objective())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub state: RunState,
    pub algorithm: Algorithm,
    pub objective: ObjectiveId,
    pub seed: u64,
    pub tick_ms: u64,
    /// Resolved configuration the run executes.
    pub config: AlgoConfig,
    /// The create request as received.
    pub request: CreateRunRequest,
    /// Number of events in the log so far.
    pub event_count: u64,
    /// Iteration at which a parameter override posted now takes effect.
    pub next_boundary: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Start,
    Pause,
    Resume,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlRequest {
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlResponse {
    pub state: RunState,
}

/// The parameter is a plain string so unknown names reach the server's
/// validation and come back as a 400 naming `parameter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRequest {
    pub parameter: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamAck {
    pub applied_at_iteration: u64,
    pub requested_at_cursor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPage {
    pub events: Vec<Event>,
    pub next_cursor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainInfo {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveInfo {
    pub id: ObjectiveId,
    pub dimension: usize,
    pub domain: DomainInfo,
    pub kind: ObjectiveKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Minimize,
    Density,
}

pub fn objectives() -> Vec<ObjectiveInfo> {
    ObjectiveId::ALL
        .iter()
        .map(|&id| {
            let d = id.domain();
            ObjectiveInfo {
                id,
                dimension: id.dim(),
                domain: DomainInfo {
                    lower: d.lower().to_vec(),
                    upper: d.upper().to_vec(),
                },
                kind: if id.is_density() {
                    ObjectiveKind::Density
                } else {
                    ObjectiveKind::Minimize
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_request_defaults() {
        let r: CreateRunRequest = serde_json::from_str(r#"{"algorithm":"gd"}"#).unwrap();
        assert_eq!(r.objective(), ObjectiveId::Bohachevsky);
        assert_eq!(r.seed, 0);
        assert!(serde_json::from_str::<CreateRunRequest>(r#"{"algorithm":"gd","bogus":1}"#).is_err());
    }

    #[test]
    fn objective_listing() {
        let all = objectives();
        assert_eq!(all.len(), ObjectiveId::ALL.len());
        let rep = all.iter().find(|o| o.id == ObjectiveId::Repressilator).unwrap();
        assert_eq!(rep.dimension, 4);
        assert_eq!(rep.domain.upper[3], 2500.0);
    }
}

//! JSON payloads exchanged with the service. Schemas live in `docs/api`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::SpikeStatistics;
use crate::diagnostics::Diagnostic;
use crate::engine::{NetworkSpec, Observable, Role};

/// Frames are emitted every this many steps unless the client asks otherwise.
pub const DEFAULT_DECIMATION: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Idle,
    Running,
    Paused,
    Done,
    Failed,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Done | Status::Failed)
    }
}

/// Body of `POST /sessions` and `POST /validate`: an inline spec or a
/// catalog preset name.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<NetworkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    /// Pause once simulated time reaches this value; run to the end if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationInfo {
    pub id: String,
    pub size: usize,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub status: Status,
    /// Steps executed so far.
    pub step: u64,
    pub t_ms: f64,
    pub total_steps: u64,
    pub dt_ms: f64,
    pub populations: Vec<PopulationInfo>,
    /// Validation warnings at creation.
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub step: u64,
    pub t_ms: f64,
    pub window_ms: f64,
    pub populations: Vec<SpikeStatistics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpikes {
    pub population: String,
    /// `[step, neuron]` pairs in step order.
    pub events: Vec<(u64, u32)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub population: String,
    pub variable: Observable,
    pub values: Vec<f64>,
}

/// Spikes of the steps `from_step..=step` and trace values at the end of
/// `step`. Consecutive frames of one stream cover adjacent step ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub from_step: u64,
    pub step: u64,
    pub t_ms: f64,
    pub spikes: Vec<PopulationSpikes>,
    pub traces: Vec<TraceSample>,
}

/// Messages pushed to stream clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(Frame),
    Status { status: Status, step: u64 },
    Error { message: String },
    /// Last message of a stream whose session was deleted.
    Closed { reason: String },
}

/// Messages accepted from stream clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientMessage {
    pub decimation: u64,
}

/// Live parameter patch: parameter path to new value.
pub type ParamPatch = BTreeMap<String, f64>;

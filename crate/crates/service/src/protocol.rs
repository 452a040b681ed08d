//! Wire protocol v1: one JSON object per WebSocket text frame, each with
//! `"v": 1` and a `"type"` tag.
//!
//! Gaze samples travel nested under a `gaze` key, as in session files, since
//! their vertical coordinate `v` would otherwise collide with the version
//! field.

use serde::{Deserialize, Serialize};

use dgui::bench::ScoreEvent;
use dgui::input::{Activation, InputEvent};
use dgui::sim::GripperState;
use dgui::zone::ProjectedZone;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCmd {
    Reset,
    Pause,
    Resume,
    EstopClear,
    Recalibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Gaze { gaze: GazeWire },
    Control { cmd: ControlCmd },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    /// Broadcast counter; strictly increasing for the life of the server.
    pub frame: u64,
    /// Simulation time (ms).
    pub t: u64,
    pub paused: bool,
    pub ee: [f64; 3],
    pub gripper: GripperState,
    pub held: Option<usize>,
    pub cubes: Vec<[f64; 3]>,
    pub contact_force: f64,
    pub estop: bool,
    pub score: i32,
    pub velocity: [f64; 3],
    pub gaze: GazeWire,
    pub zones: Vec<ProjectedZone>,
    pub activations: Vec<Activation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeWire {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventBody {
    Input(InputEvent),
    Score(ScoreEvent),
    Estop { latched: bool, t: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent once on connect.
    Welcome { gaze_owner: bool },
    State(StateFrame),
    Event(EventBody),
    Error { message: String },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
}

pub fn encode(msg: &ServerMessage) -> String {
    serde_json::to_string(&Envelope {
        v: PROTOCOL_VERSION,
        body: msg,
    })
    .expect("server messages always serialize")
}

pub fn encode_client(msg: &ClientMessage) -> String {
    serde_json::to_string(&Envelope {
        v: PROTOCOL_VERSION,
        body: msg,
    })
    .expect("client messages always serialize")
}

fn decode_as<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ProtocolError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let v = value
        .get("v")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ProtocolError::Malformed("missing version field `v`".into()))?;
    if v != PROTOCOL_VERSION as u64 {
        return Err(ProtocolError::Version(v as u32));
    }
    let mut value = value;
    value.as_object_mut().map(|o| o.remove("v"));
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// Parses a client frame. Unknown `type` values, extra fields and a missing
/// or wrong `v` are all rejected.
pub fn decode(text: &str) -> Result<ClientMessage, ProtocolError> {
    decode_as(text)
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    decode_as(text)
}

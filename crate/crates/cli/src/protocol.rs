//! JSON frames exchanged with the console over the websocket.

use fva_core::bfsm::ResponseKind;
use fva_core::engine::AgentSnapshot;
use fva_core::stats::SessionRecord;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Envelope shared by both directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    #[serde(default = "empty_object")]
    pub payload: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Profile fields a client may change; absent fields keep their value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configure {
    pub f_des: Option<f64>,
    pub gestures_enabled: Option<bool>,
    pub gaze_enabled: Option<bool>,
    pub model_id: Option<String>,
    pub gait_id: Option<String>,
    /// Start from a named preset (`fva` or `default`) before applying the
    /// other fields.
    pub preset: Option<String>,
    pub participant: Option<String>,
    pub condition: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub task: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub task: String,
    pub confidence: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub measure: String,
    pub item: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClientMessage {
    Configure(Configure),
    Command(Command),
    Rating(Rating),
    Questionnaire(Questionnaire),
    Reset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownType,
    InvalidPayload,
    BadSeq,
    Busy,
}

/// Why a client frame was refused.
#[derive(Clone, Debug, PartialEq)]
pub struct Refusal {
    pub code: ErrorCode,
    pub message: String,
}

impl Refusal {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Refusal {
            code,
            message: message.into(),
        }
    }
}

/// Parses the envelope of one text frame.
pub fn decode_envelope(text: &str) -> Result<WireMessage, Refusal> {
    serde_json::from_str(text).map_err(|e| Refusal::new(ErrorCode::Malformed, e.to_string()))
}

impl TryFrom<&WireMessage> for ClientMessage {
    type Error = Refusal;

    fn try_from(env: &WireMessage) -> Result<Self, Refusal> {
        let bad = |e: serde_json::Error| Refusal::new(ErrorCode::InvalidPayload, format!("{}: {e}", env.kind));
        let p = || env.payload.clone();
        Ok(match env.kind.as_str() {
            "configure" => ClientMessage::Configure(serde_json::from_value(p()).map_err(bad)?),
            "command" => ClientMessage::Command(serde_json::from_value(p()).map_err(bad)?),
            "rating" => ClientMessage::Rating(serde_json::from_value(p()).map_err(bad)?),
            "questionnaire" => ClientMessage::Questionnaire(serde_json::from_value(p()).map_err(bad)?),
            "reset" => ClientMessage::Reset,
            other => {
                return Err(Refusal::new(
                    ErrorCode::UnknownType,
                    format!("unknown message type `{other}`"),
                ))
            }
        })
    }
}

/// Parses one text frame into its sequence number and message.
pub fn decode(text: &str) -> Result<(u64, ClientMessage), Refusal> {
    let env = decode_envelope(text)?;
    Ok((env.seq, ClientMessage::try_from(&env)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    pub name: String,
    pub tick: u64,
    pub agent: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub records: Vec<SessionRecord>,
    pub csv: String,
}

/// Server-to-client frames, before sequencing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerMessage {
    State { tick: u64, agents: Vec<AgentSnapshot> },
    Response { kind: ResponseKind, text: String, tick: u64 },
    Event(EventFrame),
    Error { code: ErrorCode, message: String },
    SessionSummary(SessionSummary),
}

impl ServerMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::State { .. } => "state",
            ServerMessage::Response { .. } => "response",
            ServerMessage::Event(_) => "event",
            ServerMessage::Error { .. } => "error",
            ServerMessage::SessionSummary(_) => "session_summary",
        }
    }

    pub fn error(r: Refusal) -> Self {
        ServerMessage::Error {
            code: r.code,
            message: r.message,
        }
    }

    /// Wraps the message in an envelope with the given sequence number.
    pub fn envelope(&self, seq: u64) -> WireMessage {
        let mut v = serde_json::to_value(self).expect("server frames serialize");
        let payload = v
            .get_mut("payload")
            .map(Value::take)
            .unwrap_or_else(empty_object);
        WireMessage {
            kind: self.kind().to_string(),
            seq,
            payload,
        }
    }
}

/// Assigns strictly increasing sequence numbers to outgoing frames.
#[derive(Debug, Default)]
pub struct Sequencer(u64);

impl Sequencer {
    pub fn encode(&mut self, msg: &ServerMessage) -> String {
        self.0 += 1;
        serde_json::to_string(&msg.envelope(self.0)).expect("envelope serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_known_types() {
        let (seq, m) = decode(r#"{"type":"command","seq":4,"payload":{"task":"A1"}}"#).unwrap();
        assert_eq!(seq, 4);
        assert_eq!(m, ClientMessage::Command(Command { task: "A1".into() }));
        let (_, m) = decode(r#"{"type":"reset","seq":5}"#).unwrap();
        assert_eq!(m, ClientMessage::Reset);
        let (_, m) = decode(r#"{"type":"configure","seq":1,"payload":{"f_des":0.97}}"#).unwrap();
        let ClientMessage::Configure(c) = m else { panic!() };
        assert_eq!(c.f_des, Some(0.97));
    }

    #[test]
    fn decode_refusals() {
        assert_eq!(decode("{nope").unwrap_err().code, ErrorCode::Malformed);
        assert_eq!(
            decode(r#"{"type":"dance","seq":1,"payload":{}}"#).unwrap_err().code,
            ErrorCode::UnknownType
        );
        assert_eq!(
            decode(r#"{"type":"rating","seq":1,"payload":{"task":"A1"}}"#).unwrap_err().code,
            ErrorCode::InvalidPayload
        );
        assert_eq!(
            decode(r#"{"type":"configure","seq":1,"payload":{"colour":"red"}}"#).unwrap_err().code,
            ErrorCode::InvalidPayload
        );
    }

    #[test]
    fn envelope_shape() {
        let msg = ServerMessage::Response {
            kind: ResponseKind::Acceptance,
            text: "ok".into(),
            tick: 3,
        };
        let mut s = Sequencer::default();
        let a: Value = serde_json::from_str(&s.encode(&msg)).unwrap();
        let b: Value = serde_json::from_str(&s.encode(&msg)).unwrap();
        assert_eq!(a["type"], "response");
        assert_eq!(a["seq"], 1);
        assert_eq!(b["seq"], 2);
        assert_eq!(a["payload"]["kind"], "acceptance");
        assert_eq!(a["payload"]["text"], "ok");
    }
}

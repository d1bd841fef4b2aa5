//! Client commands and status frames exchanged over `/debug`.
//!
//! Server frames starting with `<` are diagram documents; frames starting
//! with `{` are status frames.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Over,
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "command", rename_all = "camelCase", deny_unknown_fields)]
pub enum ClientCommand {
    #[serde(rename_all = "camelCase")]
    LoadChildren { object_id: String },
    SetDepth { depth: usize },
    Step { kind: StepKind },
    Continue {},
}

impl ClientCommand {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed command: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Terminated,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusFrame {
    pub status: Status,
    pub message: String,
    /// Version of the latest diagram frame (0 before the first one).
    pub version: u64,
}

impl StatusFrame {
    pub fn error(message: impl Into<String>, version: u64) -> Self {
        Self {
            status: Status::Error,
            message: message.into(),
            version,
        }
    }

    pub fn terminated(message: impl Into<String>, version: u64) -> Self {
        Self {
            status: Status::Terminated,
            message: message.into(),
            version,
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("status frames always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_forms() {
        assert_eq!(
            ClientCommand::parse(r#"{"command":"loadChildren","objectId":"b"}"#).unwrap(),
            ClientCommand::LoadChildren { object_id: "b".into() }
        );
        assert_eq!(
            ClientCommand::parse(r#"{"command":"setDepth","depth":2}"#).unwrap(),
            ClientCommand::SetDepth { depth: 2 }
        );
        assert_eq!(
            ClientCommand::parse(r#"{"command":"step","kind":"in"}"#).unwrap(),
            ClientCommand::Step { kind: StepKind::In }
        );
        assert_eq!(
            ClientCommand::parse(r#"{"command":"continue"}"#).unwrap(),
            ClientCommand::Continue {}
        );
    }

    #[test]
    fn rejects_malformed_commands() {
        for text in [
            "",
            "[]",
            r#"{"command":"jump"}"#,
            r#"{"command":"setDepth","depth":-1}"#,
            r#"{"command":"step","kind":"sideways"}"#,
            r#"{"command":"loadChildren"}"#,
            r#"{"command":"continue","extra":1}"#,
        ] {
            assert!(ClientCommand::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn status_shape() {
        assert_eq!(
            StatusFrame::terminated("done", 3).to_text(),
            r#"{"status":"terminated","message":"done","version":3}"#
        );
    }
}

//! Messages exchanged with participant clients. One JSON object per text
//! frame: `{"type", "session_id", "seq", "payload"}`.

use serde::{Deserialize, Serialize};

use crate::session::{Instructions, PeriodState, QuestionnaireAnswers, QuestionnaireConfig, RoundSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    /// First message on every connection; a repeat resumes the session.
    Hello { participant_id: String },
    PeriodState(PeriodStatePayload),
    SubmitConsumption {
        consumption: f64,
        /// Defaults to the open round/period. When given and different, the
        /// submission is rejected as out of sequence.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        round: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<usize>,
    },
    RoundSummary(RoundSummary),
    PhaseChange {
        phase: String,
        #[serde(default)]
        instructions_payload: Option<Instructions>,
    },
    QuestionnaireForm(QuestionnaireForm),
    QuestionnaireSubmit(QuestionnaireAnswers),
    SessionComplete { payment_total: f64 },
    Error(ErrorPayload),
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::PeriodState(_) => "PERIOD_STATE",
            Message::SubmitConsumption { .. } => "SUBMIT_CONSUMPTION",
            Message::RoundSummary(_) => "ROUND_SUMMARY",
            Message::PhaseChange { .. } => "PHASE_CHANGE",
            Message::QuestionnaireForm(_) => "QUESTIONNAIRE_FORM",
            Message::QuestionnaireSubmit(_) => "QUESTIONNAIRE_SUBMIT",
            Message::SessionComplete { .. } => "SESSION_COMPLETE",
            Message::Error(_) => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodStatePayload {
    #[serde(flatten)]
    pub state: PeriodState,
    /// Utility earned so far this round; absent when the study hides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_utility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireForm {
    pub crt_prompts: Vec<String>,
    /// One description per MPL row; each row is safe vs lottery.
    pub mpl_rows: Vec<String>,
    pub demographics: Vec<String>,
}

impl QuestionnaireForm {
    pub fn from_config(q: &QuestionnaireConfig) -> Self {
        QuestionnaireForm {
            crt_prompts: q.crt_items.iter().map(|i| i.prompt.clone()).collect(),
            mpl_rows: q.mpl_descriptions(),
            demographics: ["crt_known", "gender", "field_of_study", "nationality"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not a well-formed envelope, or a type the server does not accept.
    BadRequest,
    /// `seq` did not increase.
    StaleSeq,
    /// Submission for a round/period that is not open.
    Sequence,
    /// Out-of-range or incomplete values.
    Validation,
    /// Message not allowed in the current phase.
    State,
    /// Envelope addressed to a different session.
    WrongSession,
    /// The participant already has a session elsewhere or cannot start one.
    Conflict,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(flatten)]
    pub message: Message,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub seq: u64,
}

impl Envelope {
    pub fn new(message: Message, session_id: Option<String>, seq: u64) -> Self {
        Envelope { message, session_id, seq }
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }

    pub fn error(session_id: Option<String>, seq: u64, code: ErrorCode, message: impl Into<String>) -> Self {
        Envelope::new(
            Message::Error(ErrorPayload {
                code,
                message: message.into(),
                fields: Vec::new(),
            }),
            session_id,
            seq,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_shape() {
        let e = Envelope::new(
            Message::SubmitConsumption {
                consumption: 12.5,
                round: None,
                period: None,
            },
            Some("s-1".into()),
            3,
        );
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["type"], "SUBMIT_CONSUMPTION");
        assert_eq!(v["seq"], 3);
        assert_eq!(v["session_id"], "s-1");
        assert_eq!(v["payload"]["consumption"], 12.5);
        assert_eq!(Envelope::parse(&e.to_json()).unwrap(), e);
    }

    #[test]
    fn hello_without_session_id() {
        let e = Envelope::parse(r#"{"type":"HELLO","seq":1,"payload":{"participant_id":"p1"}}"#).unwrap();
        assert_eq!(e.message, Message::Hello { participant_id: "p1".into() });
        assert_eq!(e.session_id, None);
    }

    #[test]
    fn malformed_is_rejected() {
        assert!(Envelope::parse(r#"{"type":"SUBMIT_CONSUMPTION","seq":1,"payload":{"consumption":"lots"}}"#).is_err());
        assert!(Envelope::parse(r#"{"type":"DANCE","seq":1,"payload":{}}"#).is_err());
        assert!(Envelope::parse("not json").is_err());
    }

    #[test]
    fn error_codes_are_snake_case() {
        let e = Envelope::error(None, 1, ErrorCode::StaleSeq, "old");
        assert!(e.to_json().contains(r#""code":"stale_seq""#));
    }
}

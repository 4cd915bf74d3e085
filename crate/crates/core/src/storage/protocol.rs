//! Server side of the wire protocol, independent of any transport.
//!
//! Every inbound message is appended to the session log before it is
//! applied, and every reply is appended before it is returned, so a log
//! always holds at least what a client has been told.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::log::{Direction, SessionLog};
use super::wire::{Envelope, ErrorCode, ErrorPayload, Message, PeriodStatePayload, QuestionnaireForm};
use crate::error::{SessionError, StorageError};
use crate::session::{Phase, PeriodState, Session, Study, StudyConfig};

/// Layout of a study on disk: `study.toml` plus `sessions/<id>.log`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyDir {
    root: PathBuf,
}

impl StudyDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        StudyDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("study.toml")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.sessions_dir().join(format!("{session_id}.log"))
    }

    /// Writes `study.toml`, refusing to overwrite a different config.
    pub fn init(&self, config: &StudyConfig) -> Result<(), StorageError> {
        let path = self.config_path();
        std::fs::create_dir_all(self.sessions_dir()).map_err(|e| StorageError::io(self.sessions_dir(), e))?;
        let text = config.to_flat_string();
        if path.exists() {
            let existing = self.load_config()?;
            if &existing != config {
                return Err(StorageError::Config(format!(
                    "{} holds a different study configuration",
                    path.display()
                )));
            }
            return Ok(());
        }
        std::fs::write(&path, text).map_err(|e| StorageError::io(&path, e))
    }

    pub fn load_config(&self) -> Result<StudyConfig, StorageError> {
        let path = self.config_path();
        let text = std::fs::read_to_string(&path).map_err(|e| StorageError::io(&path, e))?;
        StudyConfig::from_flat_str(&text).map_err(|e| StorageError::Config(format!("{}: {e}", path.display())))
    }

    /// Log files in name order.
    pub fn log_files(&self) -> Result<Vec<PathBuf>, StorageError> {
        let dir = self.sessions_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| StorageError::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        files.sort();
        Ok(files)
    }
}

fn error_reply(err: &SessionError) -> ErrorPayload {
    let (code, fields) = match err {
        SessionError::Sequence { .. } => (ErrorCode::Sequence, Vec::new()),
        SessionError::Validation(_) => (ErrorCode::Validation, Vec::new()),
        SessionError::MissingFields(f) => (ErrorCode::Validation, f.clone()),
        SessionError::State { .. } => (ErrorCode::State, Vec::new()),
        SessionError::Conflict(_) => (ErrorCode::Conflict, Vec::new()),
        _ => (ErrorCode::Internal, Vec::new()),
    };
    ErrorPayload {
        code,
        message: err.to_string(),
        fields,
    }
}

/// One session plus its log and sequence counters.
#[derive(Debug)]
pub struct SessionChannel {
    session: Session,
    log: Option<SessionLog>,
    last_in_seq: Option<u64>,
    out_seq: u64,
}

impl SessionChannel {
    /// Starts a session for `participant_id`. With `dir`, its log is
    /// created under the study directory.
    pub fn open(study: &mut Study, participant_id: &str, dir: Option<&StudyDir>, now_ms: u64) -> Result<Self, StorageError> {
        let (session, _) = study.create_session(participant_id, now_ms)?;
        let log = match dir {
            Some(d) => Some(SessionLog::open(d.log_path(session.id()), session.id())?),
            None => None,
        };
        Ok(SessionChannel {
            session,
            log,
            last_in_seq: None,
            out_seq: 0,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Flushes the log to disk.
    pub fn sync_log(&mut self) -> Result<(), StorageError> {
        match &mut self.log {
            Some(log) => log.sync(),
            None => Ok(()),
        }
    }

    pub(crate) fn set_log(&mut self, log: SessionLog) {
        self.log = Some(log);
    }

    pub fn id(&self) -> &str {
        self.session.id()
    }

    /// Handles one text frame. Replies are returned in send order. An `Err`
    /// means the log could not be written; the message was then not applied.
    pub fn handle_text(&mut self, text: &str, now_ms: u64) -> Result<Vec<Envelope>, StorageError> {
        let logged = serde_json::from_str::<serde_json::Value>(text)
            .unwrap_or_else(|_| serde_json::Value::String(text.to_string()));
        if let Some(log) = &mut self.log {
            log.append(now_ms, Direction::In, logged)?;
        }
        let replies = match Envelope::parse(text) {
            Ok(envelope) => self.apply(envelope, now_ms),
            Err(e) => vec![self.message(Message::Error(ErrorPayload {
                code: ErrorCode::BadRequest,
                message: format!("malformed message: {e}"),
                fields: Vec::new(),
            }))],
        };
        if let Some(log) = &mut self.log {
            for r in &replies {
                log.append(now_ms, Direction::Out, serde_json::to_value(r).expect("envelopes serialize"))?;
            }
        }
        Ok(replies)
    }

    fn message(&mut self, message: Message) -> Envelope {
        self.out_seq += 1;
        Envelope::new(message, Some(self.session.id().to_string()), self.out_seq)
    }

    fn error(&mut self, code: ErrorCode, text: impl Into<String>) -> Envelope {
        self.message(Message::Error(ErrorPayload {
            code,
            message: text.into(),
            fields: Vec::new(),
        }))
    }

    fn apply(&mut self, envelope: Envelope, now_ms: u64) -> Vec<Envelope> {
        if let Some(sid) = &envelope.session_id {
            if sid != self.session.id() {
                return vec![self.error(ErrorCode::WrongSession, format!("message for session {sid}"))];
            }
        }
        if let Message::Hello { participant_id } = &envelope.message {
            if participant_id != &self.session.record().participant_id {
                return vec![self.error(ErrorCode::WrongSession, "participant does not own this session")];
            }
            // a new connection restarts the client's numbering
            self.last_in_seq = Some(envelope.seq);
            return self.current_view(true);
        }
        if let Some(last) = self.last_in_seq {
            if envelope.seq <= last {
                return vec![self.error(ErrorCode::StaleSeq, format!("seq {} is not after {last}", envelope.seq))];
            }
        }
        self.last_in_seq = Some(envelope.seq);
        match envelope.message {
            Message::SubmitConsumption { consumption, round, period } => self.submit(consumption, round, period, now_ms),
            Message::QuestionnaireSubmit(answers) => match self.session.submit_questionnaire(&answers, now_ms) {
                Ok((_, payment)) => vec![self.message(Message::SessionComplete { payment_total: payment })],
                Err(e) => {
                    let payload = error_reply(&e);
                    vec![self.message(Message::Error(payload))]
                }
            },
            other => {
                let name = other.type_name();
                vec![self.error(ErrorCode::BadRequest, format!("{name} is not accepted from clients"))]
            }
        }
    }

    fn period_state(&mut self, state: PeriodState) -> Envelope {
        let cumulative_utility = self
            .session
            .config()
            .show_cumulative_utility
            .then(|| state.history.iter().map(|h| h.utility).sum());
        self.message(Message::PeriodState(PeriodStatePayload {
            state,
            cumulative_utility,
        }))
    }

    /// What a (re)connecting client needs to render the current screen.
    fn current_view(&mut self, with_instructions: bool) -> Vec<Envelope> {
        let mut out = Vec::new();
        match self.session.phase() {
            Phase::Playing => {
                if with_instructions {
                    if let Some(instructions) = self.session.pending_instructions() {
                        out.push(self.message(Message::PhaseChange {
                            phase: "instructions".into(),
                            instructions_payload: Some(instructions),
                        }));
                    }
                }
                if let Some(state) = self.session.current_state() {
                    out.push(self.period_state(state));
                }
            }
            Phase::Questionnaire => {
                let form = QuestionnaireForm::from_config(&self.session.config().questionnaire);
                out.push(self.message(Message::QuestionnaireForm(form)));
            }
            Phase::Complete => {
                let payment_total = self.session.record().payment_total.unwrap_or_default();
                out.push(self.message(Message::SessionComplete { payment_total }));
            }
        }
        out
    }

    fn submit(&mut self, consumption: f64, round: Option<usize>, period: Option<usize>, now_ms: u64) -> Vec<Envelope> {
        let Some((cur_round, cur_period)) = self.session.position() else {
            let e = SessionError::State {
                phase: self.session.phase().label().into(),
                action: "submit consumption".into(),
            };
            let payload = error_reply(&e);
            return vec![self.message(Message::Error(payload))];
        };
        let (round, period) = (round.unwrap_or(cur_round), period.unwrap_or(cur_period));
        match self.session.submit_consumption(round, period, consumption, now_ms) {
            Ok(outcome) => {
                let mut out = Vec::new();
                if let Some(summary) = outcome.round_summary {
                    out.push(self.message(Message::RoundSummary(summary)));
                }
                if let Some(change) = outcome.phase_change {
                    out.push(self.message(Message::PhaseChange {
                        phase: change.phase,
                        instructions_payload: change.instructions,
                    }));
                }
                match outcome.next {
                    Some(state) => out.push(self.period_state(state)),
                    None => out.extend(self.current_view(false)),
                }
                out
            }
            Err(e) => {
                let resync = matches!(e, SessionError::Sequence { .. });
                let payload = error_reply(&e);
                let mut out = vec![self.message(Message::Error(payload))];
                if resync {
                    out.extend(self.current_view(false));
                }
                out
            }
        }
    }
}

/// A study with all of its sessions, driven synchronously. Used for
/// simulations and replay; the network service keeps its own registry.
#[derive(Debug)]
pub struct StudyHost {
    study: Study,
    dir: Option<StudyDir>,
    sessions: BTreeMap<String, SessionChannel>,
}

impl StudyHost {
    /// With `dir`, writes `study.toml` and logs every message.
    pub fn new(config: StudyConfig, dir: Option<StudyDir>) -> Result<Self, StorageError> {
        if let Some(d) = &dir {
            d.init(&config)?;
        }
        Ok(StudyHost {
            study: Study::new(config)?,
            dir,
            sessions: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &StudyConfig {
        self.study.config()
    }

    /// Routes one client frame from `participant_id`. The first frame from
    /// a participant must be a HELLO, which opens their session.
    pub fn handle(&mut self, participant_id: &str, text: &str, now_ms: u64) -> Result<Vec<Envelope>, StorageError> {
        if !self.sessions.contains_key(participant_id) {
            match Envelope::parse(text) {
                Ok(Envelope {
                    message: Message::Hello { participant_id: p },
                    ..
                }) if p == participant_id => {
                    let channel = SessionChannel::open(&mut self.study, participant_id, self.dir.as_ref(), now_ms)?;
                    self.sessions.insert(participant_id.to_string(), channel);
                }
                _ => {
                    return Ok(vec![Envelope::error(None, 0, ErrorCode::BadRequest, "first message must be HELLO")]);
                }
            }
        }
        let channel = self.sessions.get_mut(participant_id).expect("inserted above");
        channel.handle_text(text, now_ms)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionChannel> {
        self.sessions.values()
    }

    pub fn session(&self, participant_id: &str) -> Option<&SessionChannel> {
        self.sessions.get(participant_id)
    }

    /// Splits the host so a server can lock sessions individually.
    pub fn into_parts(self) -> (Study, Option<StudyDir>, BTreeMap<String, SessionChannel>) {
        (self.study, self.dir, self.sessions)
    }

    pub(crate) fn set_dir(&mut self, dir: StudyDir) {
        self.dir = Some(dir);
    }

    pub(crate) fn study_mut(&mut self) -> &mut Study {
        &mut self.study
    }

    pub(crate) fn insert(&mut self, participant_id: String, channel: SessionChannel) {
        self.sessions.insert(participant_id, channel);
    }
}

//! Rebuilding studies from their logs.

use super::log::{read_log, Direction, SessionLog};
use super::protocol::{SessionChannel, StudyDir, StudyHost};
use super::wire::{Envelope, Message};
use crate::error::StorageError;

impl SessionChannel {
    /// Reapplies the inbound records of one log. Replies are checked
    /// against the logged ones; the log may end before the last replies
    /// (a crash between applying and acknowledging).
    fn replay(host: &mut StudyHost, path: &std::path::Path) -> Result<Option<(String, SessionChannel)>, StorageError> {
        let records = read_log(path)?;
        let diverged = |line: usize, message: String| StorageError::Malformed {
            path: path.display().to_string(),
            line,
            message,
        };
        let Some(first) = records.first() else {
            return Ok(None);
        };
        let participant = match Envelope::parse(&first.message_text()) {
            Ok(Envelope {
                message: Message::Hello { participant_id },
                ..
            }) if first.direction == Direction::In => participant_id,
            _ => return Err(diverged(1, "log does not start with an inbound HELLO".into())),
        };
        let mut channel = SessionChannel::open(host.study_mut(), &participant, None, first.timestamp_ms)?;
        if channel.id() != first.session_id {
            return Err(diverged(1, format!("session id {} does not match {}", first.session_id, channel.id())));
        }
        let mut pending: std::collections::VecDeque<Envelope> = Default::default();
        for (i, record) in records.iter().enumerate() {
            match record.direction {
                Direction::In => {
                    pending = channel.handle_text(&record.message_text(), record.timestamp_ms)?.into();
                }
                Direction::Out => {
                    let expected = pending
                        .pop_front()
                        .ok_or_else(|| diverged(i + 1, "reply without a request".into()))?;
                    let logged: Envelope = serde_json::from_value(record.message.clone())
                        .map_err(|e| diverged(i + 1, e.to_string()))?;
                    if logged != expected {
                        return Err(diverged(i + 1, "replayed reply differs from the logged one".into()));
                    }
                }
            }
        }
        Ok(Some((participant, channel)))
    }
}

impl StudyHost {
    /// Rebuilds a study from `study.toml` and its session logs. With
    /// `resume`, new messages are appended to the same logs.
    pub fn recover(dir: StudyDir, resume: bool) -> Result<StudyHost, StorageError> {
        let config = dir.load_config()?;
        let mut host = StudyHost::new(config, None)?;
        for path in dir.log_files()? {
            if let Some((participant, mut channel)) = SessionChannel::replay(&mut host, &path)? {
                if resume {
                    channel.set_log(SessionLog::open(&path, channel.id())?);
                }
                host.insert(participant, channel);
            }
        }
        if resume {
            host.set_dir(dir);
        }
        Ok(host)
    }
}

//! Append-only, line-delimited session logs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::StorageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
}

/// One line of a session log. `seq` numbers the records of one log from 1.
/// `message` is the envelope as JSON, or the raw text when the client sent
/// something that was not JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub timestamp_ms: u64,
    pub session_id: String,
    pub seq: u64,
    pub direction: Direction,
    pub message: serde_json::Value,
}

impl EventLogRecord {
    /// The message as wire text.
    pub fn message_text(&self) -> String {
        match &self.message {
            serde_json::Value::String(raw) => raw.clone(),
            other => other.to_string(),
        }
    }
}

/// Writer for one session's log. Each record is written with a single
/// `write_all` straight to the file, so a killed process leaves at most a
/// torn final line, which [`read_log`] drops.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
    session_id: String,
    next_seq: u64,
}

impl SessionLog {
    /// Opens (or creates) the log and continues its record numbering.
    pub fn open(path: impl Into<PathBuf>, session_id: &str) -> Result<Self, StorageError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| StorageError::io(parent, e))?;
        }
        let existing = if path.exists() {
            drop_torn_tail(&path)?;
            read_log(&path)?.len() as u64
        } else {
            0
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StorageError::io(&path, e))?;
        Ok(SessionLog {
            path,
            file,
            session_id: session_id.to_string(),
            next_seq: existing + 1,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, timestamp_ms: u64, direction: Direction, message: serde_json::Value) -> Result<(), StorageError> {
        let record = EventLogRecord {
            timestamp_ms,
            session_id: self.session_id.clone(),
            seq: self.next_seq,
            direction,
            message,
        };
        let mut line = serde_json::to_string(&record).expect("log records serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| StorageError::io(&self.path, e))?;
        self.next_seq += 1;
        Ok(())
    }

    pub fn sync(&mut self) -> Result<(), StorageError> {
        self.file.sync_data().map_err(|e| StorageError::io(&self.path, e))
    }
}

fn drop_torn_tail(path: &Path) -> Result<(), StorageError> {
    let bytes = std::fs::read(path).map_err(|e| StorageError::io(path, e))?;
    if bytes.last().is_some_and(|b| *b != b'\n') {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let file = OpenOptions::new().write(true).open(path).map_err(|e| StorageError::io(path, e))?;
        file.set_len(keep as u64).map_err(|e| StorageError::io(path, e))?;
    }
    Ok(())
}

/// Reads every complete record. A final line without a newline (torn
/// write) is ignored; any other unparsable line is an error.
pub fn read_log(path: &Path) -> Result<Vec<EventLogRecord>, StorageError> {
    let file = File::open(path).map_err(|e| StorageError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| StorageError::io(path, e))?;
        if n == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let record: EventLogRecord = serde_json::from_str(&line).map_err(|e| StorageError::Malformed {
            path: path.display().to_string(),
            line: number,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

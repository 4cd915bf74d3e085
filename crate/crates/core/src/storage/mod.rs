//! Wire protocol, append-only session logs, replay, canonical CSV export
//! and import, and synthetic studies driven through the protocol.

mod clock;
mod export;
mod import;
mod log;
mod protocol;
mod replay;
mod simulate;
pub mod wire;

pub use clock::{Clock, LogicalClock, SystemClock};
pub use export::{export_dataset, export_records, ExportFiles, MEASURES_HEADER, PARTICIPANTS_HEADER, PERIODS_HEADER};
pub use import::{load_canonical, load_with_import_map, ImportMap};
pub use log::{read_log, Direction, EventLogRecord, SessionLog};
pub use protocol::{SessionChannel, StudyDir, StudyHost};
pub use simulate::{simulate_study, synthetic_answers, SimulationPlan};
pub use wire::{Envelope, ErrorCode, ErrorPayload, Message};

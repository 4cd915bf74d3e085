//! Life-cycle consumption/saving experiment toolkit.
//!
//! * [`model`]: CARA utility, income processes, the closed-form optimal
//!   consumption rule and a brute-force backward-induction oracle.
//! * [`agents`]: simulated participants.
//! * [`session`]: the experiment state machine (rounds, questionnaire, payment).
//! * [`storage`]: wire protocol, append-only event logs, replay and CSV export.
//! * [`analysis`]: deviation measures, the debt-aversion index and the
//!   statistics used to compare samples.

pub mod agents;
pub mod analysis;
pub mod error;
pub mod model;
pub mod session;
pub mod storage;

pub use error::{AnalysisError, ModelError, SessionError, StorageError};

// Compiles the guide's snippets as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/storage.md")]
    mod storage {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

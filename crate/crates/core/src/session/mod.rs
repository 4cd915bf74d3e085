//! Experiment state machine: treatment schedule, period-by-period play,
//! questionnaire scoring and payment.

mod config;
mod engine;
mod payment;
mod questionnaire;

pub use config::{CrtItem, Ordering, PaymentConfig, PaymentRule, QuestionnaireConfig, StudyConfig};
pub use engine::{
    EventKind, HistoryEntry, Instructions, PeriodState, Phase, PhaseChange, RoundRecord, RoundSummary,
    Session, SessionEvent, SessionRecord, Study, SubmitOutcome,
};
pub use payment::compute_payment;
pub use questionnaire::{
    mpl_safe_count, score_questionnaire, Gender, MplChoice, QuestionnaireAnswers, ScoredQuestionnaire,
};

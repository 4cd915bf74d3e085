use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{Ordering, StudyConfig};
use super::payment::compute_payment;
use super::questionnaire::{score_questionnaire, QuestionnaireAnswers, ScoredQuestionnaire};
use crate::error::SessionError;
use crate::model::{LifecyclePath, LifecycleState, ModelParams, PeriodRecord, ShockSequence, Treatment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Playing,
    Questionnaire,
    Complete,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Playing => "playing",
            Phase::Questionnaire => "questionnaire",
            Phase::Complete => "complete",
        }
    }
}

/// One row of the decision screen's history table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub period: usize,
    pub income: f64,
    pub consumption: f64,
    pub assets: f64,
    pub utility: f64,
}

impl From<&PeriodRecord> for HistoryEntry {
    fn from(p: &PeriodRecord) -> Self {
        HistoryEntry {
            period: p.t,
            income: p.income,
            consumption: p.consumption,
            assets: p.assets,
            utility: p.utility,
        }
    }
}

/// What the participant sees at the start of a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodState {
    pub round: usize,
    pub period: usize,
    pub treatment_label: Treatment,
    pub income: f64,
    pub assets_prev: f64,
    pub wealth: f64,
    /// Set in the final period: consumption is forced to wealth.
    pub forced_consumption: Option<f64>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub treatment: Treatment,
    pub total_utility: f64,
}

/// Instruction block shown before each treatment block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instructions {
    pub treatment: Treatment,
    pub first_round: usize,
    pub last_round: usize,
    pub text: String,
}

impl Instructions {
    fn for_block(config: &StudyConfig, first_round: usize) -> Self {
        let treatment = config.treatment_for_round(first_round);
        let p = config.params_for_round(first_round);
        let last_round = first_round + config.rounds_per_treatment - 1;
        let trend = if p.income_slope >= 0.0 {
            format!("{} + {}·t", p.income_intercept, p.income_slope)
        } else {
            format!("{} − {}·t", p.income_intercept, -p.income_slope)
        };
        let text = format!(
            "Rounds {first_round}–{last_round}: each round has {h} periods. In period t you receive income {trend} plus a shock of +{s} or −{s} with equal probability. \
             Wealth is income plus savings carried over (negative savings are debt). Choose how much of your wealth to consume; the rest is carried to the next period. \
             No interest is paid or charged. In period {h} all wealth has to be consumed. Each period's consumption c earns {scale}·(1 − e^(−{theta}·c)) points.",
            h = p.horizon,
            s = p.shock_sigma,
            scale = p.utility_scale,
            theta = p.theta,
        );
        Instructions {
            treatment,
            first_round,
            last_round,
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: String,
    pub instructions: Option<Instructions>,
}

/// Result of an accepted submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub recorded: PeriodRecord,
    pub round_summary: Option<RoundSummary>,
    pub phase_change: Option<PhaseChange>,
    pub next: Option<PeriodState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Created { participant_id: String },
    ConsumptionRecorded { round: usize, period: usize, submitted: f64, recorded: f64 },
    RoundCompleted { round: usize, total_utility: f64 },
    TreatmentSwitch { round: usize, treatment: Treatment },
    QuestionnaireScored { crt_score: usize, mpl_safe_count: usize, mpl_inconsistent: bool },
    PaymentComputed { total: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub at_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub treatment: Treatment,
    pub path: LifecyclePath,
}

/// Everything recorded about one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub study_id: String,
    pub ordering: Ordering,
    pub rounds: Vec<RoundRecord>,
    pub questionnaire: Option<ScoredQuestionnaire>,
    pub payment_total: Option<f64>,
    pub event_log: Vec<SessionEvent>,
}

/// A study: configuration plus the per-round shock sequences shared by all
/// of its sessions.
#[derive(Debug, Clone)]
pub struct Study {
    config: Arc<StudyConfig>,
    shocks: Arc<Vec<ShockSequence>>,
    participants: BTreeSet<String>,
}

impl Study {
    pub fn new(config: StudyConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let shocks = ShockSequence::for_study(
            config.shock_seed,
            config.total_rounds(),
            config.params.horizon,
            config.params.shock_sigma,
        );
        Ok(Study {
            config: Arc::new(config),
            shocks: Arc::new(shocks),
            participants: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn shocks(&self) -> &[ShockSequence] {
        &self.shocks
    }

    pub fn session_id_for(&self, participant_id: &str) -> String {
        format!("{}-{}", self.config.study_id, participant_id)
    }

    /// Opens round 1, period 1 for a new participant.
    pub fn create_session(&mut self, participant_id: &str, at_ms: u64) -> Result<(Session, PeriodState), SessionError> {
        if participant_id.trim().is_empty() {
            return Err(SessionError::Validation("participant_id must not be empty".into()));
        }
        if !self.participants.insert(participant_id.to_string()) {
            return Err(SessionError::Conflict(participant_id.to_string()));
        }
        let session = Session {
            config: Arc::clone(&self.config),
            shocks: Arc::clone(&self.shocks),
            record: SessionRecord {
                session_id: self.session_id_for(participant_id),
                participant_id: participant_id.to_string(),
                study_id: self.config.study_id.clone(),
                ordering: self.config.ordering,
                rounds: Vec::new(),
                questionnaire: None,
                payment_total: None,
                event_log: vec![SessionEvent {
                    at_ms,
                    kind: EventKind::Created {
                        participant_id: participant_id.to_string(),
                    },
                }],
            },
            current: Some(LifecyclePath::new(
                self.config.treatment_for_round(1),
                self.shocks[0].clone(),
            )),
            phase: Phase::Playing,
        };
        let state = session.current_state().expect("new session is playing");
        Ok((session, state))
    }
}

/// Single participant's state machine.
#[derive(Debug, Clone)]
pub struct Session {
    config: Arc<StudyConfig>,
    shocks: Arc<Vec<ShockSequence>>,
    record: SessionRecord,
    current: Option<LifecyclePath>,
    phase: Phase,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.record.session_id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn into_record(self) -> SessionRecord {
        self.record
    }

    /// `(round, period)` currently open, if playing.
    pub fn position(&self) -> Option<(usize, usize)> {
        let path = self.current.as_ref()?;
        Some((self.record.rounds.len() + 1, path.periods.len() + 1))
    }

    fn round_params(&self) -> ModelParams {
        self.config.params_for_round(self.record.rounds.len() + 1)
    }

    pub fn current_state(&self) -> Option<PeriodState> {
        let path = self.current.as_ref()?;
        let params = self.round_params();
        let s: LifecycleState = path.next_state(&params)?;
        Some(PeriodState {
            round: self.record.rounds.len() + 1,
            period: s.t,
            treatment_label: path.treatment,
            income: s.income,
            assets_prev: s.assets_prev,
            wealth: s.wealth,
            forced_consumption: (s.t == params.horizon).then_some(s.wealth),
            history: path.periods.iter().map(HistoryEntry::from).collect(),
        })
    }

    /// Instructions for the block that starts at the current round, if the
    /// current round is the first of its block and nothing has been played.
    pub fn pending_instructions(&self) -> Option<Instructions> {
        let (round, period) = self.position()?;
        (period == 1 && (round - 1) % self.config.rounds_per_treatment == 0)
            .then(|| Instructions::for_block(&self.config, round))
    }

    pub fn submit_consumption(
        &mut self,
        round: usize,
        period: usize,
        consumption: f64,
        at_ms: u64,
    ) -> Result<SubmitOutcome, SessionError> {
        let Some((cur_round, cur_period)) = self.position() else {
            return Err(SessionError::State {
                phase: self.phase.label().into(),
                action: "submit consumption".into(),
            });
        };
        if (round, period) != (cur_round, cur_period) {
            return Err(SessionError::Sequence {
                got_round: round,
                got_period: period,
                round: cur_round,
                period: cur_period,
            });
        }
        if !consumption.is_finite() {
            return Err(SessionError::Validation(format!("consumption {consumption} is not finite")));
        }
        let params = self.round_params();
        let is_last = period == params.horizon;
        if !is_last && consumption < 0.0 {
            return Err(SessionError::Validation(format!(
                "consumption must be non-negative, got {consumption}"
            )));
        }
        let submitted = self.quantize(consumption);

        let path = self.current.as_mut().expect("position implies an open round");
        let state = path.next_state(&params).expect("position implies an open period");
        let recorded = path.record(state, submitted, &params);
        self.record.event_log.push(SessionEvent {
            at_ms,
            kind: EventKind::ConsumptionRecorded {
                round,
                period,
                submitted: consumption,
                recorded: recorded.consumption,
            },
        });

        if !is_last {
            return Ok(SubmitOutcome {
                recorded,
                round_summary: None,
                phase_change: None,
                next: self.current_state(),
            });
        }

        let finished = self.current.take().expect("open round");
        let summary = RoundSummary {
            round,
            treatment: finished.treatment,
            total_utility: finished.total_utility(),
        };
        self.record.event_log.push(SessionEvent {
            at_ms,
            kind: EventKind::RoundCompleted {
                round,
                total_utility: summary.total_utility,
            },
        });
        self.record.rounds.push(RoundRecord {
            round,
            treatment: finished.treatment,
            path: finished,
        });

        let next_round = round + 1;
        let phase_change = if next_round > self.config.total_rounds() {
            self.phase = Phase::Questionnaire;
            Some(PhaseChange {
                phase: Phase::Questionnaire.label().into(),
                instructions: None,
            })
        } else {
            let treatment = self.config.treatment_for_round(next_round);
            self.current = Some(LifecyclePath::new(treatment, self.shocks[next_round - 1].clone()));
            if treatment != summary.treatment {
                self.record.event_log.push(SessionEvent {
                    at_ms,
                    kind: EventKind::TreatmentSwitch {
                        round: next_round,
                        treatment,
                    },
                });
                Some(PhaseChange {
                    phase: "treatment_switch".into(),
                    instructions: Some(Instructions::for_block(&self.config, next_round)),
                })
            } else {
                None
            }
        };
        Ok(SubmitOutcome {
            recorded,
            round_summary: Some(summary),
            phase_change,
            next: self.current_state(),
        })
    }

    fn quantize(&self, c: f64) -> f64 {
        let step = self.config.consumption_step;
        if step > 0.0 {
            (c / step).round() * step
        } else {
            c
        }
    }

    /// Scores the questionnaire, computes payment and closes the session.
    pub fn submit_questionnaire(
        &mut self,
        answers: &QuestionnaireAnswers,
        at_ms: u64,
    ) -> Result<(ScoredQuestionnaire, f64), SessionError> {
        if self.phase != Phase::Questionnaire {
            return Err(SessionError::State {
                phase: self.phase.label().into(),
                action: "submit the questionnaire".into(),
            });
        }
        let scored = score_questionnaire(answers, &self.config.questionnaire)?;
        let payment = compute_payment(&self.record, &self.config)?;
        self.record.event_log.push(SessionEvent {
            at_ms,
            kind: EventKind::QuestionnaireScored {
                crt_score: scored.crt_score,
                mpl_safe_count: scored.mpl_safe_count,
                mpl_inconsistent: scored.mpl_inconsistent,
            },
        });
        self.record.event_log.push(SessionEvent {
            at_ms,
            kind: EventKind::PaymentComputed { total: payment },
        });
        self.record.questionnaire = Some(scored.clone());
        self.record.payment_total = Some(payment);
        self.phase = Phase::Complete;
        Ok((scored, payment))
    }
}

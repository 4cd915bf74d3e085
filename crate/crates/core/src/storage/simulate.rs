//! Synthetic participants played through the wire protocol.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clock::Clock;
use super::protocol::{StudyDir, StudyHost};
use super::wire::{Envelope, Message};
use crate::agents::{Agent, AgentSpec};
use crate::error::StorageError;
use crate::model::{mix_seed, LifecycleState};
use crate::session::{Gender, MplChoice, QuestionnaireAnswers, QuestionnaireConfig, SessionRecord, StudyConfig};

/// `participants` sessions; participant `i` uses `agents[i % agents.len()]`
/// with its seed mixed with `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub config: StudyConfig,
    pub agents: Vec<AgentSpec>,
    pub participants: usize,
    /// Prefix for participant ids (`<prefix>001`, ...).
    pub id_prefix: String,
    pub seed: u64,
}

/// Questionnaire answers drawn from `rng`: each CRT item right with
/// probability 1/2, a single MPL switch point, and a coin-flip gender.
pub fn synthetic_answers(q: &QuestionnaireConfig, rng: &mut impl Rng) -> QuestionnaireAnswers {
    let switch = rng.random_range(0..=q.mpl_rows);
    QuestionnaireAnswers {
        crt_responses: q
            .crt_items
            .iter()
            .map(|item| Some(if rng.random_bool(0.5) { item.answer } else { item.answer + 5.0 }))
            .collect(),
        crt_known: Some(rng.random_bool(0.15)),
        mpl_choices: (0..q.mpl_rows)
            .map(|row| Some(if row < switch { MplChoice::Safe } else { MplChoice::Lottery }))
            .collect(),
        gender: Some(if rng.random_bool(0.5) { Gender::Female } else { Gender::Male }),
        field_of_study: Some("simulation".into()),
        nationality: Some("synthetic".into()),
    }
}

/// Plays every participant to completion and returns their records. With
/// `dir`, the study is logged there exactly as the service would log it.
pub fn simulate_study(plan: &SimulationPlan, dir: Option<StudyDir>, clock: &dyn Clock) -> Result<Vec<SessionRecord>, StorageError> {
    if plan.agents.is_empty() {
        return Err(StorageError::Config("at least one agent spec is required".into()));
    }
    for a in &plan.agents {
        a.validate().map_err(|e| StorageError::Config(e.to_string()))?;
    }
    let mut host = StudyHost::new(plan.config.clone(), dir)?;
    let mut ids = Vec::with_capacity(plan.participants);
    for i in 0..plan.participants {
        let pid = format!("{}{:03}", plan.id_prefix, i + 1);
        let participant_seed = mix_seed(plan.seed, i as u64);
        let spec = plan.agents[i % plan.agents.len()];
        let mut agent = Agent::new(spec.with_seed(mix_seed(spec.seed, participant_seed)))
            .map_err(|e| StorageError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(participant_seed);
        play(&mut host, &pid, &mut agent, &mut rng, clock)?;
        ids.push(pid);
    }
    Ok(ids
        .iter()
        .filter_map(|p| host.session(p).map(|c| c.session().record().clone()))
        .collect())
}

fn play(host: &mut StudyHost, pid: &str, agent: &mut Agent, rng: &mut ChaCha8Rng, clock: &dyn Clock) -> Result<(), StorageError> {
    let mut seq = 1;
    let mut inbox = host.handle(pid, &Envelope::new(Message::Hello { participant_id: pid.into() }, None, seq).to_json(), clock.now_ms())?;
    loop {
        let Some(last) = inbox.last().cloned() else {
            return Err(StorageError::Config(format!("no reply for {pid}")));
        };
        let reply = match last.message {
            Message::PeriodState(p) => {
                let s = &p.state;
                let params = host.config().params_for_round(s.round);
                let state = LifecycleState::new(s.period, s.assets_prev, s.income);
                let c = agent.decide(&state, &params).map_err(|e| StorageError::Config(e.to_string()))?;
                // the session refuses negative entries, as it would from a person
                Message::SubmitConsumption {
                    consumption: c.max(0.0),
                    round: Some(s.round),
                    period: Some(s.period),
                }
            }
            Message::QuestionnaireForm(_) => {
                Message::QuestionnaireSubmit(synthetic_answers(&host.config().questionnaire, rng))
            }
            Message::SessionComplete { .. } => return Ok(()),
            Message::Error(e) => {
                return Err(StorageError::Config(format!("{pid} was refused ({:?}): {}", e.code, e.message)));
            }
            other => {
                return Err(StorageError::Config(format!("unexpected {} for {pid}", other.type_name())));
            }
        };
        seq += 1;
        let session_id = last.session_id.clone();
        inbox = host.handle(pid, &Envelope::new(reply, session_id, seq).to_json(), clock.now_ms())?;
    }
}

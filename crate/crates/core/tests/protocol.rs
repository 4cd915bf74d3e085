use debtlab::agents::{AgentKind, AgentSpec};
use debtlab::session::{compute_payment, Gender, MplChoice, QuestionnaireAnswers, StudyConfig};
use debtlab::storage::{
    export_records, read_log, simulate_study, Direction, Envelope, ErrorCode, LogicalClock, Message, SimulationPlan,
    StudyDir, StudyHost,
};
use debtlab::StorageError;

fn answers() -> QuestionnaireAnswers {
    QuestionnaireAnswers {
        crt_responses: vec![Some(5.0), Some(100.0), Some(47.0)],
        crt_known: Some(false),
        mpl_choices: (0..14).map(|i| Some(if i < 6 { MplChoice::Safe } else { MplChoice::Lottery })).collect(),
        gender: Some(Gender::Female),
        field_of_study: Some("economics".into()),
        nationality: Some("US".into()),
    }
}

struct Client {
    pid: String,
    seq: u64,
    session_id: Option<String>,
}

impl Client {
    fn new(pid: &str) -> Self {
        Client { pid: pid.into(), seq: 0, session_id: None }
    }

    fn send(&mut self, host: &mut StudyHost, message: Message) -> Vec<Envelope> {
        self.seq += 1;
        let text = Envelope::new(message, self.session_id.clone(), self.seq).to_json();
        let replies = host.handle(&self.pid, &text, 1_000 + self.seq).unwrap();
        if let Some(sid) = replies.first().and_then(|r| r.session_id.clone()) {
            self.session_id = Some(sid);
        }
        replies
    }

    fn hello(&mut self, host: &mut StudyHost) -> Vec<Envelope> {
        let pid = self.pid.clone();
        self.send(host, Message::Hello { participant_id: pid })
    }
}

fn last_state(replies: &[Envelope]) -> Option<debtlab::storage::wire::PeriodStatePayload> {
    replies.iter().rev().find_map(|r| match &r.message {
        Message::PeriodState(p) => Some(p.clone()),
        _ => None,
    })
}

fn error_code(replies: &[Envelope]) -> Option<ErrorCode> {
    replies.iter().find_map(|r| match &r.message {
        Message::Error(e) => Some(e.code),
        _ => None,
    })
}

#[test]
fn scripted_client_completes_a_borrowing_first_session() {
    let mut host = StudyHost::new(StudyConfig::default(), None).unwrap();
    let mut client = Client::new("p1");
    let mut replies = client.hello(&mut host);
    assert!(matches!(replies[0].message, Message::PhaseChange { ref phase, .. } if phase == "instructions"));
    let mut decisions = 0;
    let mut summaries = 0;
    let mut switches = 0;
    while let Some(state) = last_state(&replies) {
        let s = &state.state;
        // at the last period the server ignores what we send
        let c = if s.forced_consumption.is_some() { 1.0 } else { (s.wealth / 2.0).max(0.0) + 3.333 };
        replies = client.send(&mut host, Message::SubmitConsumption { consumption: c, round: None, period: None });
        decisions += 1;
        for r in &replies {
            match &r.message {
                Message::RoundSummary(_) => summaries += 1,
                Message::PhaseChange { phase, .. } if phase == "treatment_switch" => switches += 1,
                Message::Error(e) => panic!("unexpected error {e:?}"),
                _ => {}
            }
        }
    }
    assert_eq!((decisions, summaries, switches), (120, 6, 1));
    assert!(matches!(replies.last().unwrap().message, Message::QuestionnaireForm(_)));

    let done = client.send(&mut host, Message::QuestionnaireSubmit(answers()));
    let channel = host.session("p1").unwrap();
    let record = channel.session().record();
    let expected = compute_payment(record, host.config()).unwrap();
    assert_eq!(done[0].message, Message::SessionComplete { payment_total: expected });
    for round in &record.rounds {
        let last = round.path.periods.last().unwrap();
        assert_eq!(last.consumption, last.wealth);
        assert_eq!(last.assets, 0.0);
    }
    let resume = client.hello(&mut host);
    assert_eq!(resume[0].message, Message::SessionComplete { payment_total: expected });
    assert!(resume[0].seq > done[0].seq);
}

#[test]
fn bad_messages_leave_state_unchanged() {
    let mut host = StudyHost::new(StudyConfig::default(), None).unwrap();
    let mut client = Client::new("p");
    let before = last_state(&client.hello(&mut host)).unwrap();

    let replies = host.handle("p", r#"{"type":"SUBMIT_CONSUMPTION","seq":5,"payload":{"consumption":"ten"}}"#, 9).unwrap();
    assert_eq!(error_code(&replies), Some(ErrorCode::BadRequest));
    let replies = host.handle("p", "{{{", 9).unwrap();
    assert_eq!(error_code(&replies), Some(ErrorCode::BadRequest));
    let replies = client.send(&mut host, Message::SessionComplete { payment_total: 1e6 });
    assert_eq!(error_code(&replies), Some(ErrorCode::BadRequest));

    let replies = client.send(&mut host, Message::SubmitConsumption { consumption: -5.0, round: None, period: None });
    assert_eq!(error_code(&replies), Some(ErrorCode::Validation));

    let replies = client.send(&mut host, Message::SubmitConsumption { consumption: 1.0, round: Some(2), period: Some(1) });
    assert_eq!(error_code(&replies), Some(ErrorCode::Sequence));
    assert_eq!(last_state(&replies).unwrap(), before, "sequence errors resynchronize the client");

    let stale = Envelope::new(Message::SubmitConsumption { consumption: 1.0, round: None, period: None }, None, 1).to_json();
    assert_eq!(error_code(&host.handle("p", &stale, 9).unwrap()), Some(ErrorCode::StaleSeq));

    let replies = client.send(&mut host, Message::QuestionnaireSubmit(answers()));
    assert_eq!(error_code(&replies), Some(ErrorCode::State));

    let channel = host.session("p").unwrap();
    assert_eq!(channel.session().position(), Some((1, 1)));
    assert!(channel.session().record().rounds.is_empty());
}

#[test]
fn reconnect_replays_the_open_period() {
    let mut host = StudyHost::new(StudyConfig::default(), None).unwrap();
    let mut client = Client::new("p");
    client.hello(&mut host);
    let mut replies = Vec::new();
    for _ in 0..7 {
        replies = client.send(&mut host, Message::SubmitConsumption { consumption: 10.0, round: None, period: None });
    }
    let open = last_state(&replies).unwrap();
    let mut fresh = Client::new("p");
    let resumed = fresh.hello(&mut host);
    assert_eq!(resumed.len(), 1, "mid-round resume sends no instructions");
    assert_eq!(last_state(&resumed).unwrap(), open);
    assert_eq!(open.state.period, 8);
    assert_eq!(open.state.history.len(), 7);
    assert!(resumed[0].seq > replies.last().unwrap().seq);
}

#[test]
fn sessions_are_isolated() {
    let mut host = StudyHost::new(StudyConfig::default(), None).unwrap();
    let mut a = Client::new("a");
    let mut b = Client::new("b");
    a.hello(&mut host);
    b.hello(&mut host);
    a.send(&mut host, Message::SubmitConsumption { consumption: 10.0, round: None, period: None });
    // b forges a's session id
    b.session_id = a.session_id.clone();
    let replies = b.send(&mut host, Message::SubmitConsumption { consumption: 10.0, round: None, period: None });
    assert_eq!(error_code(&replies), Some(ErrorCode::WrongSession));
    assert_eq!(host.session("a").unwrap().session().position(), Some((1, 2)));
    assert_eq!(host.session("b").unwrap().session().position(), Some((1, 1)));

    // a first message that is not HELLO opens nothing
    let replies = host.handle("c", r#"{"type":"SUBMIT_CONSUMPTION","seq":1,"payload":{"consumption":1}}"#, 1).unwrap();
    assert_eq!(error_code(&replies), Some(ErrorCode::BadRequest));
    assert!(host.session("c").is_none());
}

fn plan(kind: AgentKind, n: usize, seed: u64) -> SimulationPlan {
    SimulationPlan {
        config: StudyConfig { consumption_step: 0.0, ..StudyConfig::default() },
        agents: vec![AgentSpec::new(kind)],
        participants: n,
        id_prefix: "p".into(),
        seed,
    }
}

#[test]
fn optimal_export_has_zero_measures_and_is_stable() {
    let p = plan(AgentKind::Optimal, 1, 3);
    let records = simulate_study(&p, None, &LogicalClock::new(0, 1)).unwrap();
    let files = export_records(&[(p.config.clone(), records.clone())]).unwrap();
    let lines: Vec<&str> = files.measures.lines().collect();
    assert_eq!(lines[0], "participant_id,ordering,round,treatment,m1,m2,m3,da");
    assert_eq!(lines.len(), 7);
    for l in &lines[1..] {
        assert!(l.ends_with(",0.000000,0.000000,0.000000,0.000000"), "{l}");
    }
    assert_eq!(files.periods.lines().count(), 1 + 120);
    assert_eq!(files.participants.lines().count(), 2);
    assert_eq!(export_records(&[(p.config.clone(), records)]).unwrap(), files);
}

#[test]
fn export_needs_a_completed_session() {
    let mut host = StudyHost::new(StudyConfig::default(), None).unwrap();
    Client::new("p").hello(&mut host);
    let records = vec![host.session("p").unwrap().session().record().clone()];
    assert!(matches!(export_records(&[(StudyConfig::default(), records)]), Err(StorageError::EmptyExport)));
}

#[test]
fn replay_reproduces_the_export() {
    let dir = tempfile::tempdir().unwrap();
    let study = StudyDir::new(dir.path().join("study"));
    let mut p = plan(AgentKind::NoisyOptimal, 4, 11);
    p.agents = vec![AgentSpec::noisy(15.0, 1), AgentSpec::new(AgentKind::HandToMouth)];
    let live = simulate_study(&p, Some(study.clone()), &LogicalClock::new(1_700_000_000_000, 250)).unwrap();
    let before = export_records(&[(p.config.clone(), live)]).unwrap();

    let host = StudyHost::recover(study.clone(), false).unwrap();
    let replayed: Vec<_> = host.sessions().map(|c| c.session().record().clone()).collect();
    assert_eq!(replayed.len(), 4);
    let after = export_records(&[(host.config().clone(), replayed)]).unwrap();
    assert_eq!(before, after);

    let log = read_log(&study.log_path("study-p001")).unwrap();
    assert_eq!(log[0].direction, Direction::In);
    assert!(log.windows(2).all(|w| w[0].seq < w[1].seq));
}

#[test]
fn crash_before_acknowledging_loses_nothing_acknowledged() {
    let dir = tempfile::tempdir().unwrap();
    let study = StudyDir::new(dir.path());
    let mut host = StudyHost::new(StudyConfig::default(), Some(study.clone())).unwrap();
    let mut client = Client::new("p");
    client.hello(&mut host);
    for _ in 0..5 {
        client.send(&mut host, Message::SubmitConsumption { consumption: 12.0, round: None, period: None });
    }
    drop(host);

    // simulate dying after logging the 6th request but before replying
    let path = study.log_path("study-p");
    let request = Envelope::new(Message::SubmitConsumption { consumption: 13.0, round: None, period: None }, client.session_id.clone(), 7).to_json();
    let mut text = std::fs::read_to_string(&path).unwrap();
    let n = read_log(&path).unwrap().len() as u64;
    text.push_str(&format!(
        "{{\"timestamp_ms\":5000,\"session_id\":\"study-p\",\"seq\":{},\"direction\":\"in\",\"message\":{request}}}\n{{\"timestamp_ms\":5001,\"sess",
        n + 1
    ));
    std::fs::write(&path, text).unwrap();

    let mut host = StudyHost::recover(study.clone(), true).unwrap();
    let session = host.session("p").unwrap().session();
    assert_eq!(session.position(), Some((1, 7)));
    // the client never saw the reply, so it retries with a fresh seq
    client.seq = 7;
    let replies = client.send(&mut host, Message::SubmitConsumption { consumption: 13.0, round: Some(1), period: Some(6) });
    assert_eq!(error_code(&replies), Some(ErrorCode::Sequence));
    assert_eq!(last_state(&replies).unwrap().state.period, 7);
    let replies = client.send(&mut host, Message::SubmitConsumption { consumption: 14.0, round: None, period: None });
    assert_eq!(last_state(&replies).unwrap().state.period, 8);

    // logs written after recovery replay too
    let again = StudyHost::recover(study, false).unwrap();
    assert_eq!(again.session("p").unwrap().session().position(), Some((1, 8)));
}

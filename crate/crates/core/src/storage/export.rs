//! Canonical CSV export: `periods.csv`, `participants.csv`, `measures.csv`.

use std::path::Path;

use crate::analysis::{compute_da, compute_measures};
use crate::error::StorageError;
use crate::session::{SessionRecord, StudyConfig};

pub const PERIODS_HEADER: [&str; 10] = [
    "participant_id", "ordering", "round", "treatment", "period", "income", "shock", "wealth", "consumption", "assets",
];
pub const PARTICIPANTS_HEADER: [&str; 9] = [
    "participant_id", "ordering", "crt_score", "crt_known", "female", "risk_aversion", "nationality", "field_of_study", "payment",
];
pub const MEASURES_HEADER: [&str; 8] = ["participant_id", "ordering", "round", "treatment", "m1", "m2", "m3", "da"];

/// The three canonical files as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportFiles {
    pub periods: String,
    pub participants: String,
    pub measures: String,
}

impl ExportFiles {
    pub fn files(&self) -> [(&'static str, &str); 3] {
        [
            ("periods.csv", &self.periods),
            ("participants.csv", &self.participants),
            ("measures.csv", &self.measures),
        ]
    }

    pub fn write_to(&self, dest: &Path) -> Result<(), StorageError> {
        std::fs::create_dir_all(dest).map_err(|e| StorageError::io(dest, e))?;
        for (name, text) in self.files() {
            let path = dest.join(name);
            std::fs::write(&path, text).map_err(|e| StorageError::io(&path, e))?;
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, StorageError> {
    let bytes = w.into_inner().map_err(|e| StorageError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Builds the canonical CSVs from completed sessions (questionnaire done,
/// payment computed). Rows are ordered by participant then round/period.
pub fn export_records(studies: &[(StudyConfig, Vec<SessionRecord>)]) -> Result<ExportFiles, StorageError> {
    let mut done: Vec<(&StudyConfig, &SessionRecord)> = studies
        .iter()
        .flat_map(|(c, rs)| rs.iter().map(move |r| (c, r)))
        .filter(|(_, r)| r.payment_total.is_some() && r.questionnaire.is_some())
        .collect();
    if done.is_empty() {
        return Err(StorageError::EmptyExport);
    }
    done.sort_by(|a, b| (&a.1.participant_id, &a.1.study_id).cmp(&(&b.1.participant_id, &b.1.study_id)));

    let mut periods = csv::Writer::from_writer(Vec::new());
    let mut participants = csv::Writer::from_writer(Vec::new());
    let mut measures = csv::Writer::from_writer(Vec::new());
    periods.write_record(PERIODS_HEADER)?;
    participants.write_record(PARTICIPANTS_HEADER)?;
    measures.write_record(MEASURES_HEADER)?;

    for (config, record) in done {
        let pid = record.participant_id.as_str();
        let ordering = record.ordering.label();
        let mut per_round = Vec::new();
        for round in &record.rounds {
            for p in &round.path.periods {
                periods.write_record([
                    pid,
                    ordering,
                    &round.round.to_string(),
                    round.treatment.label(),
                    &p.t.to_string(),
                    &num(p.income),
                    &num(p.shock),
                    &num(p.wealth),
                    &num(p.consumption),
                    &num(p.assets),
                ])?;
            }
            let m = compute_measures(&round.path, &config.params_for_round(round.round))?;
            per_round.push((round, m));
        }
        let m2: Vec<f64> = per_round.iter().map(|(_, m)| m.m2).collect();
        let da = compute_da(&m2, record.ordering)?;
        for (round, m) in &per_round {
            measures.write_record([
                pid,
                ordering,
                &round.round.to_string(),
                round.treatment.label(),
                &num(m.m1),
                &num(m.m2),
                &num(m.m3),
                &num(da.da),
            ])?;
        }
        let q = record.questionnaire.as_ref().expect("filtered to completed sessions");
        participants.write_record([
            pid,
            ordering,
            &num(q.crt_score as f64),
            &num(if q.crt_known { 1.0 } else { 0.0 }),
            &opt(q.female().map(f64::from)),
            &num(q.mpl_safe_count as f64),
            &q.nationality,
            &q.field_of_study,
            &opt(record.payment_total),
        ])?;
    }
    Ok(ExportFiles {
        periods: finish(periods)?,
        participants: finish(participants)?,
        measures: finish(measures)?,
    })
}

/// Writes the canonical CSVs for `studies` into `dest`.
pub fn export_dataset(studies: &[(StudyConfig, Vec<SessionRecord>)], dest: &Path) -> Result<ExportFiles, StorageError> {
    let files = export_records(studies)?;
    files.write_to(dest)?;
    Ok(files)
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::debt_aversion::{compute_da, DebtAversionIndex};
use crate::error::AnalysisError;
use crate::model::Treatment;
use crate::session::Ordering;

/// Participant-level covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantInfo {
    pub participant_id: String,
    pub country: String,
    pub ordering: Ordering,
    pub crt_score: Option<f64>,
    pub crt_known: Option<f64>,
    pub female: Option<f64>,
    pub risk_aversion: Option<f64>,
}

/// One participant-round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub participant_id: String,
    pub country: String,
    pub ordering: Ordering,
    pub round: usize,
    pub treatment: Treatment,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub crt_score: Option<f64>,
    pub crt_known: Option<f64>,
    pub female: Option<f64>,
    pub risk_aversion: Option<f64>,
}

/// One period of one participant's play, for consumption profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub participant_id: String,
    pub country: String,
    pub ordering: Ordering,
    pub round: usize,
    pub treatment: Treatment,
    pub period: usize,
    pub income: f64,
    pub shock: f64,
    pub wealth: f64,
    pub consumption: f64,
    pub assets: f64,
}

/// One row per participant with the debt-aversion index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub info: ParticipantInfo,
    pub m2_by_round: Vec<f64>,
    pub index: DebtAversionIndex,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDataset {
    pub rows: Vec<AnalysisRow>,
    pub periods: Vec<PeriodRow>,
}

impl AnalysisDataset {
    /// Joins measures to participant covariates. Rows are sorted by
    /// `(country, participant, round)`.
    pub fn build(
        participants: &[ParticipantInfo],
        measures: &[super::DeviationMeasures],
    ) -> Result<Self, AnalysisError> {
        let by_id: BTreeMap<(&str, &str), &ParticipantInfo> = participants
            .iter()
            .map(|p| ((p.country.as_str(), p.participant_id.as_str()), p))
            .collect();
        if by_id.len() != participants.len() {
            return Err(AnalysisError::Domain("duplicate participant in covariates".into()));
        }
        let mut seen = BTreeSet::new();
        let mut rows = Vec::with_capacity(measures.len());
        for m in measures {
            if !seen.insert((m.country.clone(), m.participant_id.clone(), m.round)) {
                return Err(AnalysisError::Domain(format!(
                    "duplicate row for participant {} round {}",
                    m.participant_id, m.round
                )));
            }
            let info = by_id.get(&(m.country.as_str(), m.participant_id.as_str()));
            rows.push(AnalysisRow {
                participant_id: m.participant_id.clone(),
                country: m.country.clone(),
                ordering: m.ordering,
                round: m.round,
                treatment: m.treatment,
                m1: m.m1,
                m2: m.m2,
                m3: m.m3,
                crt_score: info.and_then(|i| i.crt_score),
                crt_known: info.and_then(|i| i.crt_known),
                female: info.and_then(|i| i.female),
                risk_aversion: info.and_then(|i| i.risk_aversion),
            });
        }
        rows.sort_by(|a, b| {
            (a.country.as_str(), a.participant_id.as_str(), a.round)
                .cmp(&(b.country.as_str(), b.participant_id.as_str(), b.round))
        });
        Ok(AnalysisDataset {
            rows,
            periods: Vec::new(),
        })
    }

    /// Combines two datasets (e.g. two countries), keeping the row order and
    /// the one-row-per-participant-round rule.
    pub fn merge(mut self, other: AnalysisDataset) -> Result<Self, AnalysisError> {
        self.rows.extend(other.rows);
        self.periods.extend(other.periods);
        self.rows.sort_by(|a, b| {
            (a.country.as_str(), a.participant_id.as_str(), a.round)
                .cmp(&(b.country.as_str(), b.participant_id.as_str(), b.round))
        });
        if let Some(w) = self
            .rows
            .windows(2)
            .find(|w| (&w[0].country, &w[0].participant_id, w[0].round) == (&w[1].country, &w[1].participant_id, w[1].round))
        {
            return Err(AnalysisError::Domain(format!(
                "participant {} round {} appears twice in {}",
                w[0].participant_id, w[0].round, w[0].country
            )));
        }
        Ok(self)
    }

    pub fn with_periods(mut self, periods: Vec<PeriodRow>) -> Self {
        self.periods = periods;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn countries(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.country.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn rounds(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.round).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn filter(&self, keep: impl Fn(&AnalysisRow) -> bool) -> AnalysisDataset {
        let rows: Vec<AnalysisRow> = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        let ids: BTreeSet<(&str, &str)> = rows
            .iter()
            .map(|r| (r.country.as_str(), r.participant_id.as_str()))
            .collect();
        let periods = self
            .periods
            .iter()
            .filter(|p| ids.contains(&(p.country.as_str(), p.participant_id.as_str())))
            .cloned()
            .collect();
        AnalysisDataset { rows, periods }
    }

    /// Participant-level view with the debt-aversion index. Participants
    /// without a full, even set of rounds are skipped.
    pub fn participants(&self) -> Result<Vec<ParticipantRow>, AnalysisError> {
        let mut out = Vec::new();
        let mut i = 0;
        let n_rounds = self.rounds().len();
        while i < self.rows.len() {
            let first = &self.rows[i];
            let mut j = i;
            while j < self.rows.len()
                && self.rows[j].participant_id == first.participant_id
                && self.rows[j].country == first.country
            {
                j += 1;
            }
            let group = &self.rows[i..j];
            if group.len() == n_rounds && n_rounds % 2 == 0 {
                let m2_by_round: Vec<f64> = group.iter().map(|r| r.m2).collect();
                let index = compute_da(&m2_by_round, first.ordering)?;
                out.push(ParticipantRow {
                    info: ParticipantInfo {
                        participant_id: first.participant_id.clone(),
                        country: first.country.clone(),
                        ordering: first.ordering,
                        crt_score: first.crt_score,
                        crt_known: first.crt_known,
                        female: first.female,
                        risk_aversion: first.risk_aversion,
                    },
                    m2_by_round,
                    index,
                });
            }
            i = j;
        }
        Ok(out)
    }
}

/// Named numeric columns for regressions, with missing values.
pub trait Frame {
    fn n_rows(&self) -> usize;
    fn column(&self, name: &str) -> Result<Vec<Option<f64>>, AnalysisError>;
    fn cluster_ids(&self) -> Vec<String>;
}

fn covariate(
    name: &str,
    country: &str,
    ordering: Ordering,
    crt_score: Option<f64>,
    crt_known: Option<f64>,
    female: Option<f64>,
    risk_aversion: Option<f64>,
) -> Option<Option<f64>> {
    let indicator = |b: bool| Some(if b { 1.0 } else { 0.0 });
    Some(match name {
        "crt_score" => crt_score,
        "crt_score_sq" => crt_score.map(|c| c * c),
        "crt1" | "crt2" | "crt3" => {
            let k: f64 = name[3..].parse().ok()?;
            crt_score.map(|c| if c == k { 1.0 } else { 0.0 })
        }
        "crt_known" => crt_known,
        "female" => female,
        "risk_aversion" => risk_aversion,
        "saving_first" => indicator(ordering == Ordering::SavingFirst),
        _ => {
            let label = name.strip_prefix("country=")?;
            indicator(country.eq_ignore_ascii_case(label))
        }
    })
}

impl Frame for AnalysisDataset {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Responses `m1`, `m2`, `m3`; covariates `round`, `borrowing`,
    /// `crt_score`, `crt_score_sq`, `crt1..3`, `crt_known`, `female`,
    /// `risk_aversion`, `saving_first`, `country=<label>`.
    fn column(&self, name: &str) -> Result<Vec<Option<f64>>, AnalysisError> {
        self.rows
            .iter()
            .map(|r| {
                let v = match name {
                    "m1" => Some(r.m1),
                    "m2" => Some(r.m2),
                    "m3" => Some(r.m3),
                    "round" => Some(r.round as f64),
                    "borrowing" => Some(if r.treatment == Treatment::Borrowing { 1.0 } else { 0.0 }),
                    _ => covariate(name, &r.country, r.ordering, r.crt_score, r.crt_known, r.female, r.risk_aversion)
                        .ok_or_else(|| AnalysisError::UnknownColumn(name.to_string()))?,
                };
                Ok(v)
            })
            .collect()
    }

    fn cluster_ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| format!("{}/{}", r.country, r.participant_id)).collect()
    }
}

impl Frame for [ParticipantRow] {
    fn n_rows(&self) -> usize {
        self.len()
    }

    /// Response `da`; covariates as for the participant-round frame minus
    /// `round`/`borrowing`.
    fn column(&self, name: &str) -> Result<Vec<Option<f64>>, AnalysisError> {
        self.iter()
            .map(|r| {
                if name == "da" {
                    return Ok(Some(r.index.da));
                }
                let i = &r.info;
                covariate(name, &i.country, i.ordering, i.crt_score, i.crt_known, i.female, i.risk_aversion)
                    .ok_or_else(|| AnalysisError::UnknownColumn(name.to_string()))
            })
            .collect()
    }

    fn cluster_ids(&self) -> Vec<String> {
        self.iter().map(|r| format!("{}/{}", r.info.country, r.info.participant_id)).collect()
    }
}

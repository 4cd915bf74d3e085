//! Loading analysis datasets from the canonical CSVs or from external
//! files described by an import map.
//!
//! An import map is a TOML file:
//!
//! ```toml
//! country = "US"              # label when there is no country column
//! measures = "rounds.csv"     # one row per participant-round (required)
//! participants = "subj.csv"   # covariates; else read from the measures file
//! periods = "choices.csv"     # optional, for consumption profiles
//! rounds_per_treatment = 3    # derives treatment when there is no column
//!
//! [columns]                   # canonical name = column in the file
//! participant_id = "subject"
//! crt_score = "crt"
//!
//! [ordering_values]           # raw value = BF or SF
//! "1" = "BF"
//! "0" = "SF"
//! ```
//!
//! Paths are relative to the map file. Canonical names not listed map to
//! themselves. Besides the names in the canonical CSVs, `country` may be
//! mapped to take the label per row.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{AnalysisDataset, DeviationMeasures, ParticipantInfo, PeriodRow};
use crate::error::StorageError;
use crate::model::Treatment;
use crate::session::Ordering;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportMap {
    #[serde(default)]
    pub country: Option<String>,
    pub measures: PathBuf,
    #[serde(default)]
    pub participants: Option<PathBuf>,
    #[serde(default)]
    pub periods: Option<PathBuf>,
    #[serde(default)]
    pub rounds_per_treatment: Option<usize>,
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub ordering_values: BTreeMap<String, String>,
    #[serde(default)]
    pub treatment_values: BTreeMap<String, String>,
}

impl ImportMap {
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf), StorageError> {
        let text = std::fs::read_to_string(path).map_err(|e| StorageError::io(path, e))?;
        let map: ImportMap = toml::from_str(&text).map_err(|e| StorageError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((map, base))
    }
}

struct Table {
    path: String,
    rows: Vec<HashMap<String, String>>,
}

/// Reads a CSV and renames columns through `columns` (canonical -> source).
fn read_table(path: &Path, columns: &BTreeMap<String, String>) -> Result<Table, StorageError> {
    let file = std::fs::File::open(path).map_err(|e| StorageError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let source_to_canonical: HashMap<&str, &str> = columns.iter().map(|(c, s)| (s.as_str(), c.as_str())).collect();
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| {
            let h = h.trim();
            source_to_canonical.get(h).map_or(h, |c| *c).to_string()
        })
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(headers.iter().cloned().zip(record.iter().map(|v| v.trim().to_string())).collect());
    }
    Ok(Table {
        path: path.display().to_string(),
        rows,
    })
}

struct Parser<'a> {
    map: &'a ImportMap,
    default_country: String,
}

impl Parser<'_> {
    fn err(table: &Table, row: usize, message: String) -> StorageError {
        StorageError::Malformed {
            path: table.path.clone(),
            line: row + 2,
            message,
        }
    }

    fn text<'r>(table: &Table, row: usize, r: &'r HashMap<String, String>, key: &str) -> Result<&'r str, StorageError> {
        r.get(key)
            .map(String::as_str)
            .ok_or_else(|| Self::err(table, row, format!("missing column {key}")))
    }

    fn number(table: &Table, row: usize, r: &HashMap<String, String>, key: &str) -> Result<f64, StorageError> {
        Self::optional(table, row, r, key)?.ok_or_else(|| Self::err(table, row, format!("empty {key}")))
    }

    fn optional(table: &Table, row: usize, r: &HashMap<String, String>, key: &str) -> Result<Option<f64>, StorageError> {
        match r.get(key).map(String::as_str) {
            None | Some("") | Some("NA") | Some(".") => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Self::err(table, row, format!("{key} = {v:?} is not a number"))),
        }
    }

    fn country(&self, r: &HashMap<String, String>) -> String {
        r.get("country").filter(|c| !c.is_empty()).cloned().unwrap_or_else(|| self.default_country.clone())
    }

    fn ordering(&self, table: &Table, row: usize, r: &HashMap<String, String>) -> Result<Ordering, StorageError> {
        let raw = Self::text(table, row, r, "ordering")?;
        let mapped = self.map.ordering_values.get(raw).map_or(raw, String::as_str);
        Ordering::parse(mapped).ok_or_else(|| Self::err(table, row, format!("unknown ordering {raw:?}")))
    }

    fn treatment(&self, table: &Table, row: usize, r: &HashMap<String, String>, ordering: Ordering, round: usize) -> Result<Treatment, StorageError> {
        match r.get("treatment").filter(|t| !t.is_empty()) {
            Some(raw) => {
                let mapped = self.map.treatment_values.get(raw).map_or(raw.as_str(), String::as_str);
                Treatment::parse(mapped).ok_or_else(|| Self::err(table, row, format!("unknown treatment {raw:?}")))
            }
            None => Ok(ordering.treatment_for_round(round, self.map.rounds_per_treatment.unwrap_or(3))),
        }
    }

    fn round(table: &Table, row: usize, r: &HashMap<String, String>, key: &str) -> Result<usize, StorageError> {
        let v = Self::number(table, row, r, key)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Self::err(table, row, format!("{key} = {v} is not a positive integer")));
        }
        Ok(v as usize)
    }

    fn measures(&self, table: &Table) -> Result<Vec<DeviationMeasures>, StorageError> {
        let mut out = Vec::with_capacity(table.rows.len());
        for (i, r) in table.rows.iter().enumerate() {
            let ordering = self.ordering(table, i, r)?;
            let round = Self::round(table, i, r, "round")?;
            out.push(DeviationMeasures {
                participant_id: Self::text(table, i, r, "participant_id")?.to_string(),
                country: self.country(r),
                ordering,
                round,
                treatment: self.treatment(table, i, r, ordering, round)?,
                m1: Self::number(table, i, r, "m1")?,
                m2: Self::number(table, i, r, "m2")?,
                m3: Self::number(table, i, r, "m3")?,
            });
        }
        Ok(out)
    }

    fn participants(&self, table: &Table) -> Result<Vec<ParticipantInfo>, StorageError> {
        let mut seen = BTreeMap::new();
        for (i, r) in table.rows.iter().enumerate() {
            let info = ParticipantInfo {
                participant_id: Self::text(table, i, r, "participant_id")?.to_string(),
                country: self.country(r),
                ordering: self.ordering(table, i, r)?,
                crt_score: Self::optional(table, i, r, "crt_score")?,
                crt_known: Self::optional(table, i, r, "crt_known")?,
                female: Self::optional(table, i, r, "female")?,
                risk_aversion: Self::optional(table, i, r, "risk_aversion")?,
            };
            let key = (info.country.clone(), info.participant_id.clone());
            match seen.get(&key) {
                Some(prev) if prev != &info => {
                    return Err(Self::err(table, i, format!("covariates of {} vary across rows", info.participant_id)));
                }
                Some(_) => {}
                None => {
                    seen.insert(key, info);
                }
            }
        }
        Ok(seen.into_values().collect())
    }

    fn periods(&self, table: &Table) -> Result<Vec<PeriodRow>, StorageError> {
        let mut out = Vec::with_capacity(table.rows.len());
        for (i, r) in table.rows.iter().enumerate() {
            let ordering = self.ordering(table, i, r)?;
            let round = Self::round(table, i, r, "round")?;
            out.push(PeriodRow {
                participant_id: Self::text(table, i, r, "participant_id")?.to_string(),
                country: self.country(r),
                ordering,
                round,
                treatment: self.treatment(table, i, r, ordering, round)?,
                period: Self::round(table, i, r, "period")?,
                income: Self::number(table, i, r, "income")?,
                shock: Self::optional(table, i, r, "shock")?.unwrap_or(0.0),
                wealth: Self::number(table, i, r, "wealth")?,
                consumption: Self::number(table, i, r, "consumption")?,
                assets: Self::number(table, i, r, "assets")?,
            });
        }
        Ok(out)
    }
}

fn load(map: &ImportMap, base: &Path, default_country: String) -> Result<AnalysisDataset, StorageError> {
    let parser = Parser { map, default_country };
    let measures_table = read_table(&base.join(&map.measures), &map.columns)?;
    let measures = parser.measures(&measures_table)?;
    let participants = match &map.participants {
        Some(p) => parser.participants(&read_table(&base.join(p), &map.columns)?)?,
        None => parser.participants(&measures_table)?,
    };
    let periods = match &map.periods {
        Some(p) => parser.periods(&read_table(&base.join(p), &map.columns)?)?,
        None => Vec::new(),
    };
    Ok(AnalysisDataset::build(&participants, &measures)?.with_periods(periods))
}

/// Loads `measures.csv`, plus `participants.csv` and `periods.csv` when
/// present, from a canonical export, tagging every row with `country`.
pub fn load_canonical(dir: &Path, country: &str) -> Result<AnalysisDataset, StorageError> {
    let measures = dir.join("measures.csv");
    if !measures.exists() {
        return Err(StorageError::io(&measures, std::io::Error::new(std::io::ErrorKind::NotFound, "no measures.csv")));
    }
    let exists = |name: &str| dir.join(name).exists().then(|| PathBuf::from(name));
    let map = ImportMap {
        measures: "measures.csv".into(),
        participants: exists("participants.csv"),
        periods: exists("periods.csv"),
        ..ImportMap::default()
    };
    load(&map, dir, country.to_string())
}

/// Loads external data described by the import map at `path`.
pub fn load_with_import_map(path: &Path) -> Result<AnalysisDataset, StorageError> {
    let (map, base) = ImportMap::from_file(path)?;
    let country = map.country.clone().unwrap_or_else(|| "default".into());
    load(&map, &base, country)
}

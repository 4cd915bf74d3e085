use serde::{Deserialize, Serialize};

use super::config::QuestionnaireConfig;
use crate::error::SessionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MplChoice {
    Safe,
    Lottery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
    Undisclosed,
}

impl Gender {
    /// 1 for female, 0 for any other disclosed answer.
    pub fn female_indicator(self) -> Option<u8> {
        match self {
            Gender::Female => Some(1),
            Gender::Male | Gender::Other => Some(0),
            Gender::Undisclosed => None,
        }
    }
}

/// Raw answers as submitted. Every field is optional on the wire so that
/// missing ones can be reported together.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireAnswers {
    #[serde(default)]
    pub crt_responses: Vec<Option<f64>>,
    #[serde(default)]
    pub crt_known: Option<bool>,
    #[serde(default)]
    pub mpl_choices: Vec<Option<MplChoice>>,
    #[serde(default)]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub field_of_study: Option<String>,
    #[serde(default)]
    pub nationality: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuestionnaire {
    pub crt_responses: Vec<f64>,
    pub crt_score: usize,
    pub crt_known: bool,
    pub mpl_choices: Vec<MplChoice>,
    pub mpl_safe_count: usize,
    /// True when the safe choices do not form a single leading block.
    pub mpl_inconsistent: bool,
    pub gender: Gender,
    pub field_of_study: String,
    pub nationality: String,
}

impl ScoredQuestionnaire {
    pub fn female(&self) -> Option<u8> {
        self.gender.female_indicator()
    }
}

pub fn score_questionnaire(
    answers: &QuestionnaireAnswers,
    config: &QuestionnaireConfig,
) -> Result<ScoredQuestionnaire, SessionError> {
    let mut missing = Vec::new();
    let n_crt = config.crt_items.len();
    let crt: Vec<Option<f64>> = (0..n_crt)
        .map(|i| answers.crt_responses.get(i).copied().flatten().filter(|v| v.is_finite()))
        .collect();
    for (i, v) in crt.iter().enumerate() {
        if v.is_none() {
            missing.push(format!("crt_responses[{i}]"));
        }
    }
    if answers.crt_known.is_none() {
        missing.push("crt_known".into());
    }
    let mpl: Vec<Option<MplChoice>> = (0..config.mpl_rows)
        .map(|i| answers.mpl_choices.get(i).copied().flatten())
        .collect();
    for (i, v) in mpl.iter().enumerate() {
        if v.is_none() {
            missing.push(format!("mpl_choices[{i}]"));
        }
    }
    if answers.gender.is_none() {
        missing.push("gender".into());
    }
    let text = |v: &Option<String>| v.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(String::from);
    let field_of_study = text(&answers.field_of_study);
    if field_of_study.is_none() {
        missing.push("field_of_study".into());
    }
    let nationality = text(&answers.nationality);
    if nationality.is_none() {
        missing.push("nationality".into());
    }
    if answers.crt_responses.len() > n_crt {
        return Err(SessionError::Validation(format!(
            "{} CRT responses for {n_crt} items",
            answers.crt_responses.len()
        )));
    }
    if answers.mpl_choices.len() > config.mpl_rows {
        return Err(SessionError::Validation(format!(
            "{} MPL choices for {} rows",
            answers.mpl_choices.len(),
            config.mpl_rows
        )));
    }
    if !missing.is_empty() {
        return Err(SessionError::MissingFields(missing));
    }

    let crt_responses: Vec<f64> = crt.into_iter().flatten().collect();
    let crt_score = crt_responses
        .iter()
        .zip(&config.crt_items)
        .filter(|(given, item)| **given == item.answer)
        .count();
    let mpl_choices: Vec<MplChoice> = mpl.into_iter().flatten().collect();
    let (mpl_safe_count, mpl_inconsistent) = mpl_safe_count(&mpl_choices);
    Ok(ScoredQuestionnaire {
        crt_responses,
        crt_score,
        crt_known: answers.crt_known.unwrap_or_default(),
        mpl_choices,
        mpl_safe_count,
        mpl_inconsistent,
        gender: answers.gender.unwrap_or(Gender::Undisclosed),
        field_of_study: field_of_study.unwrap_or_default(),
        nationality: nationality.unwrap_or_default(),
    })
}

/// Number of safe choices and whether the list has more than one switch
/// point. For a consistent list the count is the length of the leading
/// safe block.
pub fn mpl_safe_count(choices: &[MplChoice]) -> (usize, bool) {
    let leading = choices.iter().take_while(|c| **c == MplChoice::Safe).count();
    let raw = choices.iter().filter(|c| **c == MplChoice::Safe).count();
    let consistent = choices[leading..].iter().all(|c| *c == MplChoice::Lottery);
    if consistent {
        (leading, false)
    } else {
        (raw, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MplChoice::{Lottery, Safe};

    fn complete(crt: [f64; 3], mpl: Vec<MplChoice>) -> QuestionnaireAnswers {
        QuestionnaireAnswers {
            crt_responses: crt.iter().map(|v| Some(*v)).collect(),
            crt_known: Some(false),
            mpl_choices: mpl.into_iter().map(Some).collect(),
            gender: Some(Gender::Female),
            field_of_study: Some("economics".into()),
            nationality: Some("US".into()),
        }
    }

    fn ladder(safe: usize) -> Vec<MplChoice> {
        (0..14).map(|i| if i < safe { Safe } else { Lottery }).collect()
    }

    #[test]
    fn crt_counts_exact_matches() {
        let cfg = QuestionnaireConfig::default();
        let s = score_questionnaire(&complete([5.0, 5.0, 47.0], ladder(6)), &cfg).unwrap();
        assert_eq!(s.crt_score, 3);
        let s = score_questionnaire(&complete([10.0, 100.0, 47.0], ladder(6)), &cfg).unwrap();
        assert_eq!(s.crt_score, 1);
        let s = score_questionnaire(&complete([5.000001, 5.0, 24.0], ladder(6)), &cfg).unwrap();
        assert_eq!(s.crt_score, 1);
    }

    #[test]
    fn mpl_monotone_and_alternating() {
        assert_eq!(mpl_safe_count(&ladder(6)), (6, false));
        assert_eq!(mpl_safe_count(&ladder(0)), (0, false));
        assert_eq!(mpl_safe_count(&ladder(14)), (14, false));
        let alternating: Vec<_> = (0..14).map(|i| if i % 2 == 0 { Safe } else { Lottery }).collect();
        assert_eq!(mpl_safe_count(&alternating), (7, true));
        let cfg = QuestionnaireConfig::default();
        let s = score_questionnaire(&complete([5.0, 5.0, 47.0], alternating), &cfg).unwrap();
        assert!(s.mpl_inconsistent);
        assert_eq!(s.mpl_safe_count, 7);
    }

    #[test]
    fn missing_fields_are_listed() {
        let cfg = QuestionnaireConfig::default();
        let mut a = complete([5.0, 5.0, 47.0], ladder(3));
        a.crt_responses[1] = None;
        a.mpl_choices.truncate(12);
        a.gender = None;
        a.nationality = Some("  ".into());
        match score_questionnaire(&a, &cfg) {
            Err(SessionError::MissingFields(f)) => assert_eq!(
                f,
                vec!["crt_responses[1]", "mpl_choices[12]", "mpl_choices[13]", "gender", "nationality"]
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn female_indicator() {
        assert_eq!(Gender::Female.female_indicator(), Some(1));
        assert_eq!(Gender::Other.female_indicator(), Some(0));
        assert_eq!(Gender::Undisclosed.female_indicator(), None);
    }
}

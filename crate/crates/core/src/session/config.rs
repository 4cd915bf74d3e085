use serde::{Deserialize, Serialize};

use crate::error::SessionError;
use crate::model::{ModelParams, Treatment};

/// Which treatment block comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    #[serde(rename = "BF", alias = "borrowing_first")]
    BorrowingFirst,
    #[serde(rename = "SF", alias = "saving_first")]
    SavingFirst,
}

impl Ordering {
    pub fn first(self) -> Treatment {
        match self {
            Ordering::BorrowingFirst => Treatment::Borrowing,
            Ordering::SavingFirst => Treatment::Saving,
        }
    }

    /// Treatment of 1-based `round` given `per_block` rounds per treatment.
    pub fn treatment_for_round(self, round: usize, per_block: usize) -> Treatment {
        if round <= per_block {
            self.first()
        } else {
            self.first().other()
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Ordering::BorrowingFirst => "BF",
            Ordering::SavingFirst => "SF",
        }
    }

    pub fn parse(s: &str) -> Option<Ordering> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BF" | "BORROWING_FIRST" | "BORROWINGFIRST" => Some(Ordering::BorrowingFirst),
            "SF" | "SAVING_FIRST" | "SAVINGFIRST" => Some(Ordering::SavingFirst),
            _ => None,
        }
    }
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentRule {
    SumAllRounds,
    RandomRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentConfig {
    /// Currency per utility point.
    pub exchange_rate: f64,
    pub show_up_fee: f64,
    pub rule: PaymentRule,
    /// Seeds the round drawn under [`PaymentRule::RandomRound`].
    pub seed: u64,
}

impl Default for PaymentConfig {
    fn default() -> Self {
        // Optimal play with no income risk earns 6 * 20 * 250(1 - e^-2.1)
        // = 26326.3 points; 0.00095 per point pays about $25 on top of the fee.
        PaymentConfig {
            exchange_rate: 0.00095,
            show_up_fee: 5.50,
            rule: PaymentRule::SumAllRounds,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrtItem {
    pub prompt: String,
    pub answer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireConfig {
    pub crt_items: Vec<CrtItem>,
    pub mpl_rows: usize,
    /// One description per row; generated when empty.
    pub mpl_payoffs: Vec<String>,
}

impl Default for QuestionnaireConfig {
    fn default() -> Self {
        QuestionnaireConfig {
            crt_items: default_crt_items(),
            mpl_rows: 14,
            mpl_payoffs: Vec::new(),
        }
    }
}

impl QuestionnaireConfig {
    /// Row descriptions, generating a lottery ladder when none are configured:
    /// row k offers $10 for sure against a k/rows chance of $25.
    pub fn mpl_descriptions(&self) -> Vec<String> {
        if !self.mpl_payoffs.is_empty() {
            return self.mpl_payoffs.clone();
        }
        (1..=self.mpl_rows)
            .map(|k| {
                format!(
                    "Option A: $10.00 for sure. Option B: $25.00 with probability {k}/{}, otherwise $0.00.",
                    self.mpl_rows
                )
            })
            .collect()
    }
}

fn default_crt_items() -> Vec<CrtItem> {
    vec![
        CrtItem {
            prompt: "A bat and a ball cost $1.10 in total. The bat costs $1.00 more than the ball. How much does the ball cost (in cents)?".into(),
            answer: 5.0,
        },
        CrtItem {
            prompt: "If it takes 5 machines 5 minutes to make 5 widgets, how long would it take 100 machines to make 100 widgets (in minutes)?".into(),
            answer: 5.0,
        },
        CrtItem {
            prompt: "In a lake, there is a patch of lily pads. Every day, the patch doubles in size. If it takes 48 days for the patch to cover the entire lake, how long would it take for the patch to cover half of the lake (in days)?".into(),
            answer: 47.0,
        },
    ]
}

/// Everything that is fixed when a study is created.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study_id: String,
    pub ordering: Ordering,
    pub rounds_per_treatment: usize,
    /// Risk and utility constants; the income trend is set per round from
    /// the treatment.
    pub params: ModelParams,
    pub shock_seed: u64,
    /// Submissions are rounded to this grid; `0` keeps them exact.
    pub consumption_step: f64,
    pub payment: PaymentConfig,
    pub questionnaire: QuestionnaireConfig,
    pub show_cumulative_utility: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            study_id: "study".into(),
            ordering: Ordering::BorrowingFirst,
            rounds_per_treatment: 3,
            params: ModelParams::default(),
            shock_seed: 2016,
            consumption_step: 0.01,
            payment: PaymentConfig::default(),
            questionnaire: QuestionnaireConfig::default(),
            show_cumulative_utility: true,
        }
    }
}

impl StudyConfig {
    pub fn total_rounds(&self) -> usize {
        2 * self.rounds_per_treatment
    }

    pub fn treatment_for_round(&self, round: usize) -> Treatment {
        self.ordering.treatment_for_round(round, self.rounds_per_treatment)
    }

    pub fn params_for_round(&self, round: usize) -> ModelParams {
        self.params.with_treatment(self.treatment_for_round(round))
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.params.validate()?;
        let bad = |m: String| Err(SessionError::Config(m));
        if self.study_id.trim().is_empty() {
            return bad("study_id must not be empty".into());
        }
        if self.rounds_per_treatment < 1 {
            return bad("rounds_per_treatment must be at least 1".into());
        }
        if !(self.payment.exchange_rate > 0.0 && self.payment.exchange_rate.is_finite()) {
            return bad(format!(
                "exchange_rate must be positive, got {}",
                self.payment.exchange_rate
            ));
        }
        if !(self.payment.show_up_fee >= 0.0 && self.payment.show_up_fee.is_finite()) {
            return bad("show_up_fee must be non-negative".into());
        }
        if !(self.consumption_step >= 0.0 && self.consumption_step.is_finite()) {
            return bad("consumption_step must be non-negative".into());
        }
        if self.questionnaire.mpl_rows < 1 {
            return bad("mpl_rows must be at least 1".into());
        }
        if !self.questionnaire.mpl_payoffs.is_empty()
            && self.questionnaire.mpl_payoffs.len() != self.questionnaire.mpl_rows
        {
            return bad(format!(
                "mpl_payoffs has {} entries for {} rows",
                self.questionnaire.mpl_payoffs.len(),
                self.questionnaire.mpl_rows
            ));
        }
        Ok(())
    }

    /// Parses the flat `key = value` file form.
    pub fn from_flat_str(text: &str) -> Result<Self, SessionError> {
        let flat: FlatStudyConfig =
            toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))?;
        let config = flat.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_flat_string(&self) -> String {
        toml::to_string(&FlatStudyConfig::from_config(self)).expect("flat config always serializes")
    }
}

/// On-disk layout: one key per `StudyConfig` field, no tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatStudyConfig {
    study_id: String,
    #[serde(default = "default_ordering")]
    ordering: String,
    #[serde(default = "default_rounds")]
    rounds_per_treatment: usize,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_theta")]
    theta: f64,
    #[serde(default = "default_scale")]
    utility_scale: f64,
    #[serde(default = "default_sigma")]
    shock_sigma: f64,
    #[serde(default = "default_seed")]
    shock_seed: u64,
    #[serde(default = "default_step")]
    consumption_step: f64,
    #[serde(default = "default_rate")]
    exchange_rate: f64,
    #[serde(default = "default_fee")]
    show_up_fee: f64,
    #[serde(default = "default_rule")]
    payment_rule: PaymentRule,
    #[serde(default)]
    payment_seed: u64,
    #[serde(default)]
    crt_prompts: Vec<String>,
    #[serde(default)]
    crt_answers: Vec<f64>,
    #[serde(default = "default_mpl_rows")]
    mpl_rows: usize,
    #[serde(default)]
    mpl_payoffs: Vec<String>,
    #[serde(default = "default_true")]
    show_cumulative_utility: bool,
}

fn default_ordering() -> String {
    "BF".into()
}
fn default_rounds() -> usize {
    3
}
fn default_horizon() -> usize {
    ModelParams::DEFAULT_HORIZON
}
fn default_theta() -> f64 {
    ModelParams::DEFAULT_THETA
}
fn default_scale() -> f64 {
    ModelParams::DEFAULT_SCALE
}
fn default_sigma() -> f64 {
    ModelParams::DEFAULT_SIGMA
}
fn default_seed() -> u64 {
    2016
}
fn default_step() -> f64 {
    0.01
}
fn default_rate() -> f64 {
    PaymentConfig::default().exchange_rate
}
fn default_fee() -> f64 {
    PaymentConfig::default().show_up_fee
}
fn default_rule() -> PaymentRule {
    PaymentRule::SumAllRounds
}
fn default_mpl_rows() -> usize {
    14
}
fn default_true() -> bool {
    true
}

impl FlatStudyConfig {
    fn into_config(self) -> Result<StudyConfig, SessionError> {
        let ordering = Ordering::parse(&self.ordering)
            .ok_or_else(|| SessionError::Config(format!("unknown ordering {:?}", self.ordering)))?;
        let crt_items = match (self.crt_prompts.is_empty(), self.crt_answers.is_empty()) {
            (true, true) => default_crt_items(),
            (true, false) if self.crt_answers.len() == 3 => default_crt_items()
                .into_iter()
                .zip(self.crt_answers)
                .map(|(item, answer)| CrtItem { answer, ..item })
                .collect(),
            _ if self.crt_prompts.len() == self.crt_answers.len() => self
                .crt_prompts
                .into_iter()
                .zip(self.crt_answers)
                .map(|(prompt, answer)| CrtItem { prompt, answer })
                .collect(),
            _ => {
                return Err(SessionError::Config(
                    "crt_prompts and crt_answers must have the same length".into(),
                ))
            }
        };
        Ok(StudyConfig {
            study_id: self.study_id,
            ordering,
            rounds_per_treatment: self.rounds_per_treatment,
            params: ModelParams {
                horizon: self.horizon,
                theta: self.theta,
                utility_scale: self.utility_scale,
                shock_sigma: self.shock_sigma,
                ..ModelParams::default()
            },
            shock_seed: self.shock_seed,
            consumption_step: self.consumption_step,
            payment: PaymentConfig {
                exchange_rate: self.exchange_rate,
                show_up_fee: self.show_up_fee,
                rule: self.payment_rule,
                seed: self.payment_seed,
            },
            questionnaire: QuestionnaireConfig {
                crt_items,
                mpl_rows: self.mpl_rows,
                mpl_payoffs: self.mpl_payoffs,
            },
            show_cumulative_utility: self.show_cumulative_utility,
        })
    }

    fn from_config(c: &StudyConfig) -> Self {
        FlatStudyConfig {
            study_id: c.study_id.clone(),
            ordering: c.ordering.label().into(),
            rounds_per_treatment: c.rounds_per_treatment,
            horizon: c.params.horizon,
            theta: c.params.theta,
            utility_scale: c.params.utility_scale,
            shock_sigma: c.params.shock_sigma,
            shock_seed: c.shock_seed,
            consumption_step: c.consumption_step,
            exchange_rate: c.payment.exchange_rate,
            show_up_fee: c.payment.show_up_fee,
            payment_rule: c.payment.rule,
            payment_seed: c.payment.seed,
            crt_prompts: c.questionnaire.crt_items.iter().map(|i| i.prompt.clone()).collect(),
            crt_answers: c.questionnaire.crt_items.iter().map(|i| i.answer).collect(),
            mpl_rows: c.questionnaire.mpl_rows,
            mpl_payoffs: c.questionnaire.mpl_payoffs.clone(),
            show_cumulative_utility: c.show_cumulative_utility,
        }
    }
}

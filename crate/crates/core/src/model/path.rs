use serde::{Deserialize, Serialize};

use super::params::{ModelParams, Treatment};
use super::policy::{optimal_consumption, utility_unchecked};
use super::shocks::ShockSequence;
use crate::error::ModelError;

/// Decision state at the start of period `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecycleState {
    pub t: usize,
    pub assets_prev: f64,
    pub income: f64,
    pub wealth: f64,
}

impl LifecycleState {
    pub fn new(t: usize, assets_prev: f64, income: f64) -> Self {
        LifecycleState {
            t,
            assets_prev,
            income,
            wealth: income + assets_prev,
        }
    }
}

/// One completed period of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: usize,
    pub shock: f64,
    pub income: f64,
    pub assets_prev: f64,
    pub wealth: f64,
    pub consumption: f64,
    /// End-of-period assets, `wealth - consumption`.
    pub assets: f64,
    pub utility: f64,
}

/// A full (or partial, while a round is in progress) round of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecyclePath {
    pub treatment: Treatment,
    pub shocks: ShockSequence,
    pub periods: Vec<PeriodRecord>,
}

impl LifecyclePath {
    pub fn new(treatment: Treatment, shocks: ShockSequence) -> Self {
        LifecyclePath {
            treatment,
            shocks,
            periods: Vec::new(),
        }
    }

    /// Starting state of the next undecided period.
    pub fn next_state(&self, params: &ModelParams) -> Option<LifecycleState> {
        let t = self.periods.len() + 1;
        if t > params.horizon || t > self.shocks.len() {
            return None;
        }
        let assets_prev = self.periods.last().map_or(0.0, |p| p.assets);
        let income = params.with_treatment(self.treatment).trend_income(t) + self.shocks.at(t);
        Some(LifecycleState::new(t, assets_prev, income))
    }

    /// Appends the decision for `state`. In the final period the choice is
    /// overridden with the whole of wealth.
    pub(crate) fn record(&mut self, state: LifecycleState, consumption: f64, params: &ModelParams) -> PeriodRecord {
        let consumption = if state.t == params.horizon {
            state.wealth
        } else {
            consumption
        };
        let rec = PeriodRecord {
            t: state.t,
            shock: self.shocks.at(state.t),
            income: state.income,
            assets_prev: state.assets_prev,
            wealth: state.wealth,
            consumption,
            assets: if state.t == params.horizon {
                0.0
            } else {
                state.wealth - consumption
            },
            utility: utility_unchecked(consumption, params),
        };
        self.periods.push(rec);
        rec
    }

    pub fn is_complete(&self, params: &ModelParams) -> bool {
        self.periods.len() == params.horizon
    }

    pub fn incomes(&self) -> impl Iterator<Item = f64> + '_ {
        self.periods.iter().map(|p| p.income)
    }

    pub fn consumption(&self) -> impl Iterator<Item = f64> + '_ {
        self.periods.iter().map(|p| p.consumption)
    }

    pub fn total_utility(&self) -> f64 {
        self.periods.iter().map(|p| p.utility).sum()
    }
}

/// A consumption rule: `(state, history of this round) -> consumption`.
pub trait Policy {
    fn consume(&mut self, state: &LifecycleState, history: &[PeriodRecord]) -> f64;
}

impl<F> Policy for F
where
    F: FnMut(&LifecycleState, &[PeriodRecord]) -> f64,
{
    fn consume(&mut self, state: &LifecycleState, history: &[PeriodRecord]) -> f64 {
        self(state, history)
    }
}

/// The closed-form optimal rule for a fixed set of parameters.
#[derive(Debug, Clone, Copy)]
pub struct OptimalPolicy {
    params: ModelParams,
}

impl OptimalPolicy {
    pub fn new(params: ModelParams) -> Self {
        OptimalPolicy { params }
    }
}

impl Policy for OptimalPolicy {
    fn consume(&mut self, state: &LifecycleState, _history: &[PeriodRecord]) -> f64 {
        optimal_consumption(state.wealth, state.t, &self.params).unwrap_or(f64::NAN)
    }
}

/// Runs `policy` through one round: `a_0 = 0`, `w_t = y_t + a_{t-1}`,
/// `a_t = w_t - c_t`, and `c_T = w_T`.
///
/// `params` supplies the risk and utility constants; its income trend is
/// replaced by `treatment`'s.
pub fn simulate_path(
    policy: &mut impl Policy,
    treatment: Treatment,
    shocks: &ShockSequence,
    params: &ModelParams,
) -> Result<LifecyclePath, ModelError> {
    params.validate()?;
    if shocks.len() != params.horizon {
        return Err(ModelError::ShockLength {
            got: shocks.len(),
            expected: params.horizon,
        });
    }
    let params = params.with_treatment(treatment);
    let mut path = LifecyclePath::new(treatment, shocks.clone());
    while let Some(state) = path.next_state(&params) {
        let c = policy.consume(&state, &path.periods);
        if !c.is_finite() {
            return Err(ModelError::Simulation { t: state.t, value: c });
        }
        path.record(state, c, &params);
    }
    Ok(path)
}

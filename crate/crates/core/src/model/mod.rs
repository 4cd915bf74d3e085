//! The life-cycle consumption problem: CARA utility, trend-plus-shock
//! income, the closed-form optimal rule and a backward-induction oracle.

mod oracle;
mod params;
mod path;
mod policy;
mod shocks;

pub use oracle::{dp_oracle, oracle_sweep, OracleReport, MAX_ORACLE_HORIZON};
pub use params::{ModelParams, Treatment};
pub use path::{simulate_path, LifecyclePath, LifecycleState, OptimalPolicy, PeriodRecord, Policy};
pub use policy::{
    expected_remaining_income, income, log_cosh, log_cosh_sum, marginal_utility,
    optimal_consumption, precautionary_term, utility,
};
pub use shocks::ShockSequence;

pub(crate) use shocks::mix_seed;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::model::{optimal_consumption, simulate_path, utility, LifecyclePath, ModelParams, OptimalPolicy, Treatment};
use crate::session::Ordering;

/// Aggregate deviations of one round from optimal consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// Signed: positive means under-consumption.
    pub m1: f64,
    /// Absolute.
    pub m2: f64,
    /// Utility shortfall against the unconditional optimal path.
    pub m3: f64,
}

/// [`Measures`] tagged with who and where they come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationMeasures {
    pub participant_id: String,
    pub country: String,
    pub ordering: Ordering,
    pub round: usize,
    pub treatment: Treatment,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

/// m1 and m2 compare each choice to the optimum given the participant's own
/// wealth; m3 compares utility to the path the optimal rule would have taken
/// from period 1 on the same shocks.
pub fn compute_measures(path: &LifecyclePath, params: &ModelParams) -> Result<Measures, AnalysisError> {
    let params = params.with_treatment(path.treatment);
    if !path.is_complete(&params) || path.shocks.len() != params.horizon {
        return Err(AnalysisError::IncompletePath(format!(
            "{} of {} periods recorded",
            path.periods.len(),
            params.horizon
        )));
    }
    let optimal_path = simulate_path(&mut OptimalPolicy::new(params), path.treatment, &path.shocks, &params)?;
    let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
    for (actual, best) in path.periods.iter().zip(&optimal_path.periods) {
        let gap = optimal_consumption(actual.wealth, actual.t, &params)? - actual.consumption;
        m1 += gap;
        m2 += gap.abs();
        m3 += utility(best.consumption, &params)? - utility(actual.consumption, &params)?;
    }
    Ok(Measures { m1, m2, m3 })
}

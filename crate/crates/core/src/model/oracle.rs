//! Brute-force backward induction over the binary shock tree.
//!
//! Independent of the closed form: every node solves its own first-order
//! condition `u'(c) = E[V'_{t+1}(a)]`, where the continuation marginal value
//! comes from recursively solving both child nodes (envelope theorem gives
//! `V'_{t+1}(a) = u'(c*_{t+1})`). Cost is `O(iters^(T-t))`, so the horizon
//! is capped.

use super::params::ModelParams;
use super::policy::{marginal_utility, optimal_consumption};
use crate::error::ModelError;

/// Largest horizon the oracle will enumerate.
pub const MAX_ORACLE_HORIZON: usize = 6;

const TOLERANCE: f64 = 1e-12;
const MAX_ITERS: usize = 200;

/// Optimal consumption at period `t` with savings `assets_prev` carried in and
/// `current_income` just received, found by backward induction.
pub fn dp_oracle(
    params: &ModelParams,
    t: usize,
    assets_prev: f64,
    current_income: f64,
) -> Result<f64, ModelError> {
    params.validate()?;
    if params.horizon > MAX_ORACLE_HORIZON {
        return Err(ModelError::Capability {
            horizon: params.horizon,
            max: MAX_ORACLE_HORIZON,
        });
    }
    params.check_period(t)?;
    let wealth = assets_prev + current_income;
    if !wealth.is_finite() {
        return Err(ModelError::Domain(format!("wealth {wealth} is not finite")));
    }
    Ok(solve_node(params, t, wealth))
}

fn solve_node(params: &ModelParams, t: usize, wealth: f64) -> f64 {
    if t == params.horizon {
        return wealth;
    }
    let next_trend = params.trend_income(t + 1);
    let sigma = params.shock_sigma;
    // Decreasing in c: u' falls with c, and less saving lowers next-period
    // consumption on both branches.
    let foc = |c: f64| {
        let assets = wealth - c;
        let up = solve_node(params, t + 1, assets + next_trend + sigma);
        let down = solve_node(params, t + 1, assets + next_trend - sigma);
        let continuation = 0.5 * (marginal_utility(up, params) + marginal_utility(down, params));
        // compare in log space to keep the sign exact for very large |c|
        (-params.theta * c) - (continuation / (params.theta * params.utility_scale)).ln()
    };

    let remaining = (params.horizon - t + 1) as f64;
    let expected_future: f64 = ((t + 1)..=params.horizon).map(|j| params.trend_income(j)).sum();
    let center = (wealth + expected_future) / remaining;
    let mut width = 1.0 + params.shock_sigma * remaining;
    let (mut lo, mut hi) = (center - width, center + width);
    let (mut f_lo, mut f_hi) = (foc(lo), foc(hi));
    while f_lo < 0.0 || f_hi > 0.0 {
        width *= 2.0;
        lo = center - width;
        hi = center + width;
        f_lo = foc(lo);
        f_hi = foc(hi);
    }
    illinois(foc, lo, hi, f_lo, f_hi)
}

/// Root of a decreasing function bracketed by `f(lo) >= 0 >= f(hi)`:
/// Illinois false position, falling back to bisection when it stalls.
fn illinois(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    if f_hi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for iter in 0..MAX_ITERS {
        if hi - lo <= TOLERANCE {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if iter % 4 == 3 || !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

/// Result of comparing the closed form with the oracle over a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub nodes: usize,
    pub max_abs_diff: f64,
}

/// Visits every node reachable under the closed-form policy from zero
/// assets (both shock branches each period, one branch when `sigma = 0`)
/// and records the largest gap between the closed form and [`dp_oracle`].
pub fn oracle_sweep(params: &ModelParams) -> Result<OracleReport, ModelError> {
    fn visit(params: &ModelParams, t: usize, assets_prev: f64, report: &mut OracleReport) -> Result<(), ModelError> {
        if t > params.horizon {
            return Ok(());
        }
        let shocks: &[f64] = if params.shock_sigma == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sign in shocks {
            let income = params.trend_income(t) + sign * params.shock_sigma;
            let wealth = assets_prev + income;
            let closed = optimal_consumption(wealth, t, params)?;
            let oracle = dp_oracle(params, t, assets_prev, income)?;
            report.nodes += 1;
            report.max_abs_diff = report.max_abs_diff.max((closed - oracle).abs());
            visit(params, t + 1, wealth - closed, report)?;
        }
        Ok(())
    }
    params.validate()?;
    if params.horizon > MAX_ORACLE_HORIZON {
        return Err(ModelError::Capability {
            horizon: params.horizon,
            max: MAX_ORACLE_HORIZON,
        });
    }
    let mut report = OracleReport {
        nodes: 0,
        max_abs_diff: 0.0,
    };
    visit(params, 1, 0.0, &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Treatment;

    fn small(horizon: usize) -> ModelParams {
        ModelParams::for_treatment(Treatment::Borrowing).with_horizon(horizon)
    }

    #[test]
    fn sweep_counts_every_reachable_node() {
        let p = ModelParams::default().with_horizon(3);
        let r = oracle_sweep(&p).unwrap();
        assert_eq!(r.nodes, 2 + 4 + 8);
        assert!(r.max_abs_diff < 1e-6, "{}", r.max_abs_diff);
        let r = oracle_sweep(&p.with_sigma(0.0)).unwrap();
        assert_eq!(r.nodes, 3);
        assert!(r.max_abs_diff < 1e-9);
    }

    #[test]
    fn single_period_consumes_wealth() {
        let p = small(1);
        assert_eq!(dp_oracle(&p, 1, 0.0, 17.25).unwrap(), 17.25);
        assert_eq!(dp_oracle(&p, 1, -40.0, 10.0).unwrap(), -30.0);
    }

    #[test]
    fn deterministic_two_period_splits_income() {
        let p = small(2).with_sigma(0.0);
        let c = dp_oracle(&p, 1, 0.0, 10.0).unwrap();
        assert!((c - 15.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn two_period_precautionary_saving() {
        // FOC by hand: 2c = w + E[y2] - ln cosh(theta*sigma)/theta
        let p = small(2);
        let c = dp_oracle(&p, 1, 0.0, 20.0).unwrap();
        let expected = (20.0 + 20.0 - 0.2f64.cosh().ln() / 0.02) / 2.0;
        assert!((c - expected).abs() < 1e-9, "{c} vs {expected}");
    }

    #[test]
    fn horizon_above_bound_is_capability_error() {
        let p = small(7);
        assert_eq!(
            dp_oracle(&p, 1, 0.0, 10.0),
            Err(ModelError::Capability { horizon: 7, max: 6 })
        );
    }
}

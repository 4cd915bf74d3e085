//! Utility, income, and the closed-form optimal consumption rule.

use super::params::{ModelParams, Treatment};
use crate::error::ModelError;

/// CARA utility `scale * (1 - exp(-theta * c))`. Defined for every finite
/// `c`, including negative consumption.
pub fn utility(c: f64, params: &ModelParams) -> Result<f64, ModelError> {
    if !c.is_finite() {
        return Err(ModelError::Domain(format!("consumption {c} is not finite")));
    }
    Ok(utility_unchecked(c, params))
}

#[inline]
pub(crate) fn utility_unchecked(c: f64, params: &ModelParams) -> f64 {
    -params.utility_scale * (-params.theta * c).exp_m1()
}

/// `u'(c) = theta * scale * exp(-theta * c)`.
#[inline]
pub fn marginal_utility(c: f64, params: &ModelParams) -> f64 {
    params.theta * params.utility_scale * (-params.theta * c).exp()
}

/// Income received in period `t` under `treatment` given the realized shock.
pub fn income(
    t: usize,
    treatment: Treatment,
    shock: f64,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    params.check_period(t)?;
    if shock.abs() != params.shock_sigma {
        return Err(ModelError::Domain(format!(
            "shock {shock} is not ±{}",
            params.shock_sigma
        )));
    }
    Ok(params.with_treatment(treatment).trend_income(t) + shock)
}

/// Expected income over periods `t+1..=T` (`zeta_t`).
pub fn expected_remaining_income(t: usize, params: &ModelParams) -> Result<f64, ModelError> {
    params.check_period(t)?;
    let big_t = params.horizon as f64;
    let t = t as f64;
    Ok((big_t - t) * (params.income_intercept + params.income_slope * (big_t + t + 1.0) / 2.0))
}

/// Overflow-free `ln cosh x`.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Dimensionless precautionary sum
/// `sum_{j=0}^{T-t} sum_{i=1}^{j} ln cosh(theta*sigma / (T-t+1-i))`.
///
/// Term `i` appears once for every `j >= i`, which collapses the double sum
/// to `sum_{k=1}^{T-t} k * ln cosh(theta*sigma / k)`.
pub fn log_cosh_sum(t: usize, params: &ModelParams) -> Result<f64, ModelError> {
    params.check_period(t)?;
    let x = params.theta * params.shock_sigma;
    let remaining = params.horizon - t;
    Ok((1..=remaining)
        .map(|k| k as f64 * log_cosh(x / k as f64))
        .sum())
}

/// Precautionary saving `Gamma_t` in consumption units: the amount by which
/// income risk lowers optimal consumption times the remaining horizon.
pub fn precautionary_term(t: usize, params: &ModelParams) -> Result<f64, ModelError> {
    Ok(log_cosh_sum(t, params)? / params.theta)
}

/// Optimal consumption given current wealth:
/// `c*_t(w) = (w + zeta_t - Gamma_t) / (T - t + 1)`.
pub fn optimal_consumption(wealth: f64, t: usize, params: &ModelParams) -> Result<f64, ModelError> {
    params.check_period(t)?;
    if !wealth.is_finite() {
        return Err(ModelError::Domain(format!("wealth {wealth} is not finite")));
    }
    if t == params.horizon {
        return Ok(wealth);
    }
    let remaining = (params.horizon - t + 1) as f64;
    Ok((wealth + expected_remaining_income(t, params)? - precautionary_term(t, params)?) / remaining)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn borrowing() -> ModelParams {
        ModelParams::for_treatment(Treatment::Borrowing)
    }

    #[test]
    fn utility_values() {
        let p = borrowing();
        assert_eq!(utility(0.0, &p).unwrap(), 0.0);
        assert!((utility(10_000.0, &p).unwrap() - 250.0).abs() < 1e-6);
        // 250 * (1 - e^-2), 30-digit evaluation
        assert_relative_eq!(
            utility(100.0, &p).unwrap(),
            216.166_179_190_846_827,
            max_relative = 1e-14
        );
        assert!(utility(-50.0, &p).unwrap() < 0.0);
        assert!(utility(f64::NAN, &p).is_err());
        assert!(utility(f64::INFINITY, &p).is_err());
    }

    #[test]
    fn income_examples() {
        let p = borrowing();
        assert_eq!(income(5, Treatment::Borrowing, -10.0, &p).unwrap(), 40.0);
        assert_eq!(income(5, Treatment::Saving, -10.0, &p).unwrap(), 150.0);
        assert!(income(0, Treatment::Borrowing, 10.0, &p).is_err());
        assert!(income(21, Treatment::Borrowing, 10.0, &p).is_err());
        assert!(income(3, Treatment::Borrowing, 3.0, &p).is_err());
        let zero = p.with_sigma(0.0);
        for t in 1..=20 {
            let b = income(t, Treatment::Borrowing, 0.0, &zero).unwrap();
            let s = income(t, Treatment::Saving, 0.0, &zero).unwrap();
            assert_eq!(b + s, 210.0);
        }
    }

    #[test]
    fn expected_remaining_income_matches_direct_sum() {
        for treatment in [Treatment::Borrowing, Treatment::Saving] {
            let p = ModelParams::for_treatment(treatment);
            for t in 1..=20 {
                let direct: f64 = ((t + 1)..=20).map(|j| p.trend_income(j)).sum();
                assert_eq!(expected_remaining_income(t, &p).unwrap(), direct);
            }
        }
        let p = borrowing();
        assert_eq!(expected_remaining_income(20, &p).unwrap(), 0.0);
        assert_eq!(expected_remaining_income(19, &p).unwrap(), 200.0);
        assert_eq!(expected_remaining_income(1, &p).unwrap(), 2090.0);
    }

    #[test]
    fn log_cosh_is_stable() {
        assert_eq!(log_cosh(0.0), 0.0);
        assert_relative_eq!(log_cosh(0.2), 0.2f64.cosh().ln(), max_relative = 1e-14);
        assert_relative_eq!(log_cosh(-3.0), 3.0f64.cosh().ln(), max_relative = 1e-14);
        // cosh overflows long before this
        assert_relative_eq!(log_cosh(1000.0), 1000.0 - std::f64::consts::LN_2);
    }

    #[test]
    fn log_cosh_sum_matches_literal_double_sum() {
        for sigma in [0.0, 10.0, 37.0] {
            for theta in [0.01, 0.02, 0.05] {
                let p = borrowing().with_sigma(sigma).with_theta(theta);
                for t in 1..=20 {
                    let n = 20 - t;
                    let mut literal = 0.0;
                    for j in 0..=n {
                        for i in 1..=j {
                            literal += (theta * sigma / (n + 1 - i) as f64).cosh().ln();
                        }
                    }
                    assert_relative_eq!(
                        log_cosh_sum(t, &p).unwrap(),
                        literal,
                        epsilon = 1e-13,
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn precautionary_examples() {
        let p = borrowing();
        assert_eq!(precautionary_term(20, &p).unwrap(), 0.0);
        // theta*sigma = 0.2; ln cosh(0.2) from a direct float evaluation
        assert_relative_eq!(log_cosh_sum(19, &p).unwrap(), 0.019_868_071_840_007_36, max_relative = 1e-12);
        assert_relative_eq!(
            precautionary_term(19, &p).unwrap(),
            0.019_868_071_840_007_36 / 0.02,
            max_relative = 1e-12
        );
        let flat = p.with_sigma(0.0);
        for t in 1..=20 {
            assert_eq!(precautionary_term(t, &flat).unwrap(), 0.0);
        }
        let mut prev = f64::INFINITY;
        for t in 1..=20 {
            let g = precautionary_term(t, &p).unwrap();
            assert!(g >= 0.0 && g <= prev);
            prev = g;
        }
    }

    #[test]
    fn optimal_consumption_examples() {
        let p = borrowing();
        assert_eq!(optimal_consumption(37.5, 20, &p).unwrap(), 37.5);
        assert_eq!(optimal_consumption(10.0, 1, &p.with_sigma(0.0)).unwrap(), 105.0);
        let c0 = optimal_consumption(0.0, 5, &p).unwrap();
        let c16 = optimal_consumption(16.0, 5, &p).unwrap();
        assert_relative_eq!(c16 - c0, 1.0, max_relative = 1e-12);
        assert!(optimal_consumption(f64::NAN, 5, &p).is_err());
    }

    #[test]
    fn certainty_reduction() {
        let p = borrowing().with_sigma(0.0);
        for t in 1..=20 {
            for w in [-300.0, 0.0, 55.5, 900.0] {
                let expected = (w + expected_remaining_income(t, &p).unwrap()) / (21 - t) as f64;
                assert_eq!(optimal_consumption(w, t, &p).unwrap(), expected);
            }
        }
    }

    #[test]
    fn utility_derivatives_match_finite_differences() {
        // u' at the stated step 1e-4; u'' at 1e-2, since the second
        // difference at 1e-4 loses ~1e-4 relative accuracy to f64 rounding.
        let p = borrowing();
        let h = 1e-4;
        let h2 = 1e-2;
        for k in 0..100 {
            let c = -200.0 + 600.0 * k as f64 / 99.0;
            let u = |x: f64| utility(x, &p).unwrap();
            let d1 = (u(c + h) - u(c - h)) / (2.0 * h);
            let d2 = (u(c + h2) - 2.0 * u(c) + u(c - h2)) / (h2 * h2);
            let a1 = marginal_utility(c, &p);
            let a2 = -p.theta * a1;
            assert!(d1 > 0.0 && d2 < 0.0);
            assert_relative_eq!(d1, a1, max_relative = 1e-4);
            assert_relative_eq!(d2, a2, max_relative = 1e-4);
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Structural constants of the life-cycle decision problem.
///
/// The income process is `y_t = income_intercept + income_slope * t + eps_t`
/// with `eps_t = ±shock_sigma` equiprobable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub horizon: usize,
    /// Absolute risk aversion of the CARA utility.
    pub theta: f64,
    pub utility_scale: f64,
    pub shock_sigma: f64,
    pub income_intercept: f64,
    pub income_slope: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::for_treatment(Treatment::Borrowing)
    }
}

impl ModelParams {
    pub const DEFAULT_HORIZON: usize = 20;
    pub const DEFAULT_THETA: f64 = 0.02;
    pub const DEFAULT_SCALE: f64 = 250.0;
    pub const DEFAULT_SIGMA: f64 = 10.0;

    pub fn for_treatment(treatment: Treatment) -> Self {
        let (income_intercept, income_slope) = treatment.income_trend();
        ModelParams {
            horizon: Self::DEFAULT_HORIZON,
            theta: Self::DEFAULT_THETA,
            utility_scale: Self::DEFAULT_SCALE,
            shock_sigma: Self::DEFAULT_SIGMA,
            income_intercept,
            income_slope,
        }
    }

    /// Same risk and utility constants, income trend replaced by `treatment`'s.
    pub fn with_treatment(self, treatment: Treatment) -> Self {
        let (income_intercept, income_slope) = treatment.income_trend();
        ModelParams {
            income_intercept,
            income_slope,
            ..self
        }
    }

    pub fn with_horizon(self, horizon: usize) -> Self {
        ModelParams { horizon, ..self }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        ModelParams { theta, ..self }
    }

    pub fn with_sigma(self, shock_sigma: f64) -> Self {
        ModelParams {
            shock_sigma,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon < 1 {
            return Err(ModelError::InvalidParams("horizon must be at least 1".into()));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(self.shock_sigma >= 0.0 && self.shock_sigma.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "shock_sigma must be non-negative, got {}",
                self.shock_sigma
            )));
        }
        if !(self.utility_scale > 0.0 && self.utility_scale.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "utility_scale must be positive, got {}",
                self.utility_scale
            )));
        }
        if !self.income_intercept.is_finite() || !self.income_slope.is_finite() {
            return Err(ModelError::InvalidParams("income trend must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn check_period(&self, t: usize) -> Result<(), ModelError> {
        if t == 0 || t > self.horizon {
            Err(ModelError::PeriodOutOfRange {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    /// Zero-shock income in period `t`.
    pub fn trend_income(&self, t: usize) -> f64 {
        self.income_intercept + self.income_slope * t as f64
    }
}

/// Income process of a round: rising (must borrow to smooth) or falling
/// (must save).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Borrowing,
    Saving,
}

impl Treatment {
    /// `(intercept, slope)` of the deterministic income trend.
    pub fn income_trend(self) -> (f64, f64) {
        match self {
            Treatment::Borrowing => (0.0, 10.0),
            Treatment::Saving => (210.0, -10.0),
        }
    }

    pub fn other(self) -> Treatment {
        match self {
            Treatment::Borrowing => Treatment::Saving,
            Treatment::Saving => Treatment::Borrowing,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Treatment::Borrowing => "borrowing",
            Treatment::Saving => "saving",
        }
    }

    pub fn parse(s: &str) -> Option<Treatment> {
        match s.trim().to_ascii_lowercase().as_str() {
            "borrowing" | "b" => Some(Treatment::Borrowing),
            "saving" | "s" => Some(Treatment::Saving),
            _ => None,
        }
    }
}

impl std::fmt::Display for Treatment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

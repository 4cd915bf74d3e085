//! Simulated participants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{optimal_consumption, LifecycleState, ModelParams, PeriodRecord, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Follows the closed-form rule.
    Optimal,
    /// Consumes current income.
    HandToMouth,
    /// Optimal, but never consumes more than current wealth.
    DebtAverse,
    /// Optimal plus Gaussian noise, truncated at zero.
    NoisyOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub noise_sd: f64,
    pub seed: u64,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            noise_sd: 0.0,
            seed: 0,
        }
    }

    pub fn noisy(noise_sd: f64, seed: u64) -> Self {
        AgentSpec {
            kind: AgentKind::NoisyOptimal,
            noise_sd,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        AgentSpec { seed, ..self }
    }

    /// Parses `optimal`, `handtomouth`, `debtaverse`, or `noisy[:SD]`
    /// (default SD 20).
    pub fn parse(s: &str) -> Option<AgentSpec> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (s, None),
        };
        let kind = match name.replace(['-', '_'], "").as_str() {
            "optimal" => AgentKind::Optimal,
            "handtomouth" | "h2m" => AgentKind::HandToMouth,
            "debtaverse" => AgentKind::DebtAverse,
            "noisy" | "noisyoptimal" => AgentKind::NoisyOptimal,
            _ => return None,
        };
        let noise_sd = match (kind, arg) {
            (AgentKind::NoisyOptimal, Some(a)) => a.parse().ok().filter(|v: &f64| *v >= 0.0)?,
            (AgentKind::NoisyOptimal, None) => 20.0,
            (_, Some(_)) => return None,
            (_, None) => 0.0,
        };
        Some(AgentSpec {
            kind,
            noise_sd,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Stateless part of every rule: what the agent would consume given
/// `noise` as its Gaussian draw (ignored by non-noisy kinds).
pub fn agent_policy(
    spec: &AgentSpec,
    t: usize,
    wealth: f64,
    income: f64,
    params: &ModelParams,
    noise: f64,
) -> Result<f64, ModelError> {
    let optimal = || optimal_consumption(wealth, t, params);
    Ok(match spec.kind {
        AgentKind::Optimal => optimal()?,
        AgentKind::HandToMouth => income,
        AgentKind::DebtAverse => optimal()?.min(wealth),
        AgentKind::NoisyOptimal => (optimal()? + noise).max(0.0),
    })
}

/// A participant with its own noise stream.
#[derive(Debug, Clone)]
pub struct Agent {
    spec: AgentSpec,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(spec: AgentSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        Ok(Agent {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn decide(&mut self, state: &LifecycleState, params: &ModelParams) -> Result<f64, ModelError> {
        let noise = if self.spec.kind == AgentKind::NoisyOptimal && self.spec.noise_sd > 0.0 {
            Normal::new(0.0, self.spec.noise_sd)
                .map_err(|e| ModelError::InvalidParams(e.to_string()))?
                .sample(&mut self.rng)
        } else {
            0.0
        };
        agent_policy(&self.spec, state.t, state.wealth, state.income, params, noise)
    }

    /// Adapter for [`crate::model::simulate_path`]; `params` must already
    /// carry the round's treatment.
    pub fn as_policy<'a>(&'a mut self, params: &'a ModelParams) -> impl Policy + 'a {
        move |state: &LifecycleState, _: &[PeriodRecord]| self.decide(state, params).unwrap_or(f64::NAN)
    }
}

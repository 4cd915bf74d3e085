use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Realized income shocks of one round, each exactly `+sigma` or `-sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSequence {
    shocks: Vec<f64>,
    seed: u64,
}

impl ShockSequence {
    /// Draws `horizon` fair ±`sigma` shocks from a ChaCha stream keyed by `seed`.
    pub fn generate(seed: u64, horizon: usize, sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shocks = (0..horizon)
            .map(|_| if rng.random_bool(0.5) { sigma } else { -sigma })
            .collect();
        ShockSequence { shocks, seed }
    }

    /// The fixed per-round sequences of a study. Round `r` (1-based) uses a
    /// seed derived from `(study_seed, r)`, so adding rounds never changes
    /// earlier ones.
    pub fn for_study(study_seed: u64, rounds: usize, horizon: usize, sigma: f64) -> Vec<Self> {
        (1..=rounds as u64)
            .map(|r| Self::generate(mix_seed(study_seed, r), horizon, sigma))
            .collect()
    }

    /// Builds a sequence from explicit values; every entry must be `±sigma`.
    pub fn from_values(shocks: Vec<f64>, sigma: f64) -> Result<Self, ModelError> {
        if let Some(bad) = shocks.iter().find(|e| e.abs() != sigma) {
            return Err(ModelError::Domain(format!(
                "shock {bad} is not ±{sigma}"
            )));
        }
        Ok(ShockSequence { shocks, seed: 0 })
    }

    pub fn zeros(horizon: usize) -> Self {
        ShockSequence {
            shocks: vec![0.0; horizon],
            seed: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.shocks
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.shocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shocks.is_empty()
    }

    /// Shock of period `t` (1-based).
    pub fn at(&self, t: usize) -> f64 {
        self.shocks[t - 1]
    }
}

/// splitmix64 finalizer over `seed + index`.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::session::Ordering;

/// Denominators below this are treated as a perfectly optimal participant.
pub const DA_DEGENERATE_BELOW: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebtAversionIndex {
    pub ordering: Ordering,
    /// In `[-1, 1]`; 1 means deviations only in borrowing rounds.
    pub da: f64,
    /// No deviations at all; `da` is reported as 0.
    pub degenerate: bool,
}

/// Normalized difference between borrowing-round and saving-round m2.
///
/// `per_round_m2` lists rounds in play order; the first half is the block
/// that `ordering` puts first.
pub fn compute_da(per_round_m2: &[f64], ordering: Ordering) -> Result<DebtAversionIndex, AnalysisError> {
    if per_round_m2.is_empty() || per_round_m2.len() % 2 != 0 {
        return Err(AnalysisError::Domain(format!(
            "need an even, non-zero number of rounds, got {}",
            per_round_m2.len()
        )));
    }
    if let Some(bad) = per_round_m2.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(AnalysisError::Domain(format!("m2 must be finite and non-negative, got {bad}")));
    }
    let half = per_round_m2.len() / 2;
    let first: f64 = per_round_m2[..half].iter().sum();
    let second: f64 = per_round_m2[half..].iter().sum();
    let total = first + second;
    let (borrowing, saving) = match ordering {
        Ordering::BorrowingFirst => (first, second),
        Ordering::SavingFirst => (second, first),
    };
    if total < DA_DEGENERATE_BELOW {
        return Ok(DebtAversionIndex {
            ordering,
            da: 0.0,
            degenerate: true,
        });
    }
    Ok(DebtAversionIndex {
        ordering,
        da: (borrowing - saving) / total,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningDeltas {
    /// `m2[r-1] - m2[r]` for r = 2..; positive is improvement.
    pub consecutive: Vec<f64>,
    /// `m2[1] - m2[r]` for r = 2...
    pub from_first: Vec<f64>,
}

pub fn learning_deltas(per_round_m2: &[f64]) -> LearningDeltas {
    let consecutive = per_round_m2.windows(2).map(|w| w[0] - w[1]).collect();
    let from_first = per_round_m2
        .iter()
        .skip(1)
        .map(|m| per_round_m2[0] - m)
        .collect();
    LearningDeltas {
        consecutive,
        from_first,
    }
}

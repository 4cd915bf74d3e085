use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{PaymentRule, StudyConfig};
use super::engine::SessionRecord;
use crate::error::SessionError;
use crate::model::mix_seed;

/// Converts utility points to currency under the study's payment rule,
/// rounded to cents and never below the show-up fee.
pub fn compute_payment(record: &SessionRecord, config: &StudyConfig) -> Result<f64, SessionError> {
    let expected = config.total_rounds();
    let complete = record.rounds.len() == expected
        && record
            .rounds
            .iter()
            .all(|r| r.path.periods.len() == config.params.horizon);
    if !complete {
        return Err(SessionError::State {
            phase: format!("{} of {expected} rounds complete", record.rounds.len()),
            action: "compute payment".into(),
        });
    }
    let pay = &config.payment;
    let points = match pay.rule {
        PaymentRule::SumAllRounds => record.rounds.iter().map(|r| r.path.total_utility()).sum::<f64>(),
        PaymentRule::RandomRound => {
            let seed = mix_seed(pay.seed, fnv1a(record.participant_id.as_bytes()));
            let drawn = ChaCha8Rng::seed_from_u64(seed).random_range(0..expected);
            record.rounds[drawn].path.total_utility()
        }
    };
    let raw = pay.show_up_fee + pay.exchange_rate * points;
    Ok(((raw * 100.0).round() / 100.0).max(pay.show_up_fee))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

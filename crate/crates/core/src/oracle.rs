//! Independent ground-truth searches: exhaustive enumeration over discrete
//! sequence spaces and uniform random search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::sequence::{ActionStep, ControlEnvironment, ControlSequence};

pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_sequence: ControlSequence,
    pub best_reward: f64,
    pub evaluated_count: u64,
    pub exhaustive: bool,
}

/// Decode an enumeration index into a sequence over the discrete alphabet.
/// Mixed-radix counting, least-significant digit = last step.
fn decode(index: u64, alphabet: usize, steps: usize) -> ControlSequence {
    let mut seq = vec![ActionStep::discrete(0); steps];
    let mut rest = index;
    for t in (0..steps).rev() {
        seq[t] = ActionStep::discrete((rest % alphabet as u64) as usize);
        rest /= alphabet as u64;
    }
    seq
}

/// Exact maximum of the reward over the full discrete sequence space.
/// Ties break toward the lowest enumeration index, so parallelism never
/// changes the answer.
pub fn brute_force(
    env: &dyn ControlEnvironment,
    alphabet: usize,
    cap: u64,
) -> Result<OracleResult> {
    let steps = env.steps();
    let size = (alphabet as u128).pow(steps as u32);
    if size > cap as u128 {
        return Err(QctrlError::SpaceTooLarge { size, cap });
    }
    let total = size as u64;
    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let seq = decode(idx, alphabet, steps);
            let reward = env.score(&seq).expect("discrete enumeration stays in-domain");
            (reward, idx)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(OracleResult {
        best_sequence: decode(best.1, alphabet, steps),
        best_reward: best.0,
        evaluated_count: total,
        exhaustive: true,
    })
}

/// Best of `n` uniformly random sequences over the task's action space.
pub fn random_search(
    env: &dyn ControlEnvironment,
    n: u64,
    rng: &mut dyn rand::RngCore,
) -> Result<OracleResult> {
    assert!(n >= 1);
    let steps = env.steps();
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_sequence = Vec::new();
    for _ in 0..n {
        let seq: ControlSequence = (0..steps).map(|_| env.uniform_step(rng)).collect();
        let reward = env.score(&seq)?;
        if reward > best_reward {
            best_reward = reward;
            best_sequence = seq;
        }
    }
    Ok(OracleResult { best_sequence, best_reward, evaluated_count: n, exhaustive: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::{DdConfig, DdEnvironment, DdTask};
    use crate::ising::{IsingConfig, IsingEnvironment, IsingTask};
    use crate::rng::chacha_stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn decode_is_mixed_radix_counting() {
        let seq = decode(0, 4, 3);
        assert!(seq.iter().all(|s| s.choice == 0));
        let seq = decode(1, 4, 3);
        assert_eq!(seq.iter().map(|s| s.choice).collect::<Vec<_>>(), vec![0, 0, 1]);
        let seq = decode(4u64.pow(3) - 1, 4, 3);
        assert!(seq.iter().all(|s| s.choice == 3));
        let seq = decode(27, 4, 3);
        assert_eq!(seq.iter().map(|s| s.choice).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn brute_force_rejects_oversized_spaces() {
        let cfg = IsingConfig { total_time: 5.0, ..Default::default() };
        let env = IsingEnvironment::new(cfg, IsingTask::Discrete).unwrap();
        assert!(brute_force(&env, 2, 1 << 20).is_err());
    }

    #[test]
    fn ising_single_spin_short_horizon_optimum() {
        let env = IsingEnvironment::new(IsingConfig::default(), IsingTask::Discrete).unwrap();
        let result = brute_force(&env, 2, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert!(result.exhaustive);
        assert_eq!(result.evaluated_count, 1 << 10);
        assert_abs_diff_eq!(result.best_reward, 0.331, epsilon = 1e-3);
    }

    #[test]
    fn dd_no_noise_two_steps_reaches_identity() {
        let cfg = DdConfig { noise_strength: 0.0, total_time: 0.004, ..Default::default() };
        let env = DdEnvironment::new(cfg, DdTask::Discrete).unwrap();
        let result = brute_force(&env, 4, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert_abs_diff_eq!(result.best_reward, 1.0, epsilon = 1e-7);
        // Lowest-index optimum is the idle sequence (0, 0); doubled pulses on
        // a fixed axis also reach the identity up to global phase.
        assert_eq!(
            result.best_sequence.iter().map(|s| s.choice).collect::<Vec<_>>(),
            vec![0, 0]
        );
        let doubled = vec![ActionStep::discrete(2), ActionStep::discrete(2)];
        assert_abs_diff_eq!(env.score(&doubled).unwrap(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn brute_force_is_reproducible() {
        let cfg = IsingConfig { total_time: 0.3, ..Default::default() };
        let env = IsingEnvironment::new(cfg, IsingTask::Discrete).unwrap();
        let a = brute_force(&env, 2, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        let b = brute_force(&env, 2, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_search_is_deterministic_and_dominated() {
        let env = IsingEnvironment::new(IsingConfig::default(), IsingTask::Discrete).unwrap();
        let a = random_search(&env, 200, &mut chacha_stream(4, 1)).unwrap();
        let b = random_search(&env, 200, &mut chacha_stream(4, 1)).unwrap();
        assert_eq!(a, b);
        assert!(!a.exhaustive);
        let exact = brute_force(&env, 2, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert!(a.best_reward <= exact.best_reward + 1e-12);
        // More samples can only improve the best-of-n reward.
        let mut rng = chacha_stream(4, 1);
        let small = random_search(&env, 50, &mut rng).unwrap();
        assert!(a.best_reward >= small.best_reward - 1e-12);
    }
}

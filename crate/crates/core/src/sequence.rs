//! Task-agnostic control sequence representation shared by the policy, the
//! environments, the trainer and the oracles.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One time step of control: a discrete choice plus raw continuous values.
///
/// The raw values are the unclamped draws from the policy; environments clamp
/// them to their physical domain at evaluation time, while densities are
/// always evaluated at the raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub choice: usize,
    pub values: Vec<f64>,
}

impl ActionStep {
    pub fn discrete(choice: usize) -> Self {
        Self { choice, values: Vec::new() }
    }
}

pub type ControlSequence = Vec<ActionStep>;

/// A sequence drawn from the policy, with the log-probability it had under
/// the parameters that generated it and the raw reward the environment gave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSequence {
    pub actions: ControlSequence,
    pub logprob_old: f64,
    pub reward_raw: f64,
}

/// Per-step action-space shape of a task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskShape {
    /// Number of discrete choices (softmax width).
    pub n_choices: usize,
    /// Number of continuous values per step.
    pub n_values: usize,
    /// Nominal scale of each continuous value, used to normalize policy
    /// inputs and to draw uniform baseline samples.
    pub value_scale: f64,
    /// Lower bound of the physical value domain divided by value_scale
    /// (0.0 for one-sided domains like a deviation magnitude, -1.0 for
    /// symmetric ones).
    pub value_low: f64,
}

impl TaskShape {
    pub fn discrete(n_choices: usize) -> Self {
        Self { n_choices, n_values: 0, value_scale: 1.0, value_low: 0.0 }
    }
}

/// Scoring surface every concrete control task exposes.
///
/// Implementations are pure: scoring the same sequence twice gives the same
/// reward, and a batch may be scored from parallel workers.
pub trait ControlEnvironment: Sync {
    fn steps(&self) -> usize;
    fn shape(&self) -> TaskShape;

    /// Raw reward in [0, 1]; higher is better.
    fn score(&self, actions: &[ActionStep]) -> crate::Result<f64>;

    /// One uniformly random action step, for baselines and reward shifting.
    fn uniform_step(&self, rng: &mut dyn rand::RngCore) -> ActionStep {
        let shape = self.shape();
        let choice = rng.gen_range(0..shape.n_choices);
        let values = (0..shape.n_values)
            .map(|_| rng.gen_range(shape.value_low * shape.value_scale..=shape.value_scale))
            .collect();
        ActionStep { choice, values }
    }
}

/// Exact-equality key for discrete parts plus tolerance comparison for
/// continuous parts, used for memory deduplication.
pub fn sequences_equal(a: &[ActionStep], b: &[ActionStep], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.choice == y.choice
                && x.values.len() == y.values.len()
                && x.values
                    .iter()
                    .zip(&y.values)
                    .all(|(u, v)| (u - v).abs() <= tol)
        })
}

//! Training loop: batch sampling, a capacity-bounded memory of the best
//! sequences, a sequence-level clipped surrogate with the advantage taken
//! against the best reward seen so far, Adam updates, and window-based
//! adaptation of sigma and epsilon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::policy::{self, PolicyLayout, PolicyParameters};
use crate::rng::chacha_stream;
use crate::sequence::{
    sequences_equal, ControlEnvironment, ControlSequence, SampledSequence, TaskShape,
};

pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Sequence,
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub memory_size: usize,
    pub inner_iters: usize,
    pub clip_epsilon: f64,
    pub epsilon_floor: f64,
    pub learning_rate: f64,
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub window_length: usize,
    pub alpha_clip: (f64, f64),
    pub max_iterations: usize,
    pub run_seed: u64,
    pub loss_mode: LossMode,
    pub hidden: usize,
    pub shift_rollouts: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            memory_size: 1024,
            inner_iters: 4,
            clip_epsilon: 0.2,
            epsilon_floor: 0.02,
            learning_rate: 1e-3,
            sigma_init: 0.25,
            sigma_min: 1e-3,
            window_length: 10,
            alpha_clip: (0.5, 2.0),
            max_iterations: 500,
            run_seed: 0,
            loss_mode: LossMode::Sequence,
            hidden: policy::DEFAULT_HIDDEN,
            shift_rollouts: 1000,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.inner_iters == 0 || self.max_iterations == 0 {
            return Err(QctrlError::ConfigInvalid(
                "batch_size, inner_iters and max_iterations must be positive".into(),
            ));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(QctrlError::ConfigInvalid("clip_epsilon must lie in (0, 1)".into()));
        }
        if !(self.alpha_clip.0 < 1.0 && 1.0 < self.alpha_clip.1) {
            return Err(QctrlError::ConfigInvalid(
                "alpha_clip must bracket 1.0".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.sigma_init <= 0.0 || self.sigma_min <= 0.0 {
            return Err(QctrlError::ConfigInvalid(
                "learning_rate, sigma_init and sigma_min must be positive".into(),
            ));
        }
        if self.window_length == 0 {
            return Err(QctrlError::ConfigInvalid("window_length must be positive".into()));
        }
        Ok(())
    }
}

/// A(c) = R(c) - R(c*). Shift-invariant: adding a constant to both inputs
/// cancels.
pub fn advantage(reward: f64, best_reward: f64) -> f64 {
    reward - best_reward
}

pub fn clip(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(c)
}

/// Capacity-bounded set of the best sequences found so far, sorted by raw
/// reward descending, deduplicated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryBuffer {
    capacity: usize,
    entries: Vec<SampledSequence>,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[SampledSequence] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [SampledSequence] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best_reward(&self) -> Option<f64> {
        self.entries.first().map(|e| e.reward_raw)
    }

    pub fn average_reward(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|e| e.reward_raw).sum::<f64>() / self.entries.len() as f64)
        }
    }

    /// Merge a batch: keep the top `capacity` of old entries plus batch,
    /// without duplicate action sequences.
    pub fn update(&mut self, batch: &[SampledSequence]) {
        if self.capacity == 0 {
            return;
        }
        let mut candidates: Vec<&SampledSequence> = batch.iter().collect();
        candidates.sort_by(|a, b| b.reward_raw.partial_cmp(&a.reward_raw).unwrap());
        for cand in candidates {
            let duplicate = self
                .entries
                .iter()
                .any(|e| sequences_equal(&e.actions, &cand.actions, DEDUP_TOL));
            if duplicate {
                continue;
            }
            if self.entries.len() < self.capacity {
                let pos = self
                    .entries
                    .partition_point(|e| e.reward_raw >= cand.reward_raw);
                self.entries.insert(pos, cand.clone());
            } else if cand.reward_raw > self.entries.last().unwrap().reward_raw {
                self.entries.pop();
                let pos = self
                    .entries
                    .partition_point(|e| e.reward_raw >= cand.reward_raw);
                self.entries.insert(pos, cand.clone());
            }
        }
    }
}

/// History of per-iteration memory-average rewards plus the derived window of
/// relative improvements.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdaptState {
    mem_averages: Vec<f64>,
    improvements: Vec<f64>,
    pub last_alpha: f64,
}

impl AdaptState {
    pub fn new() -> Self {
        Self { mem_averages: Vec::new(), improvements: Vec::new(), last_alpha: 1.0 }
    }

    pub fn record(&mut self, mem_average: f64) {
        if let Some(&prev) = self.mem_averages.last() {
            let improvement = if prev > 1e-12 { (mem_average - prev) / prev } else { 0.0 };
            self.improvements.push(improvement);
        }
        self.mem_averages.push(mem_average);
    }

    pub fn ready(&self, window_length: usize) -> bool {
        self.improvements.len() >= 2 * window_length
    }

    /// alpha_t = 1 + (mean(W_{t-l}) - mean(W_t)) / mean(W_{t-l}), over the two
    /// most recent disjoint windows, clipped.
    pub fn change_parameter(&mut self, window_length: usize, alpha_clip: (f64, f64)) -> f64 {
        assert!(self.ready(window_length));
        let n = self.improvements.len();
        let recent = &self.improvements[n - window_length..];
        let older = &self.improvements[n - 2 * window_length..n - window_length];
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let older_mean = mean(older);
        let alpha = if older_mean.abs() < 1e-12 {
            1.0
        } else {
            1.0 + (older_mean - mean(recent)) / older_mean
        };
        let alpha = clip(alpha, alpha_clip.0, alpha_clip.1);
        self.last_alpha = alpha;
        alpha
    }
}

/// Standard Adam moments for the flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

/// One bias-corrected Adam ascent step along `grads`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(QctrlError::ShapeMismatch(format!(
            "adam shapes: params {}, grads {}, moments {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    for i in 0..params.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grads[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] += lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// A sequence annotated for the surrogate: per-step old log-probs under the
/// snapshot parameters and the sequence advantage.
#[derive(Debug, Clone)]
pub struct WeightedSequence {
    pub actions: ControlSequence,
    pub logprob_old_steps: Vec<f64>,
    pub advantage: f64,
}

impl WeightedSequence {
    pub fn logprob_old(&self) -> f64 {
        self.logprob_old_steps.iter().sum()
    }
}

/// Mean over the batch of min(r A, clip(r, 1-eps, 1+eps) A) with the
/// sequence-level ratio r = exp(logp - logp_old).
pub fn surrogate_loss(
    batch: &[WeightedSequence],
    params: &PolicyParameters,
    shape: &TaskShape,
    eps: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for item in batch {
        let lp = policy::log_prob(params, shape, &item.actions)?;
        let r = (lp - item.logprob_old()).exp();
        let a = item.advantage;
        total += (r * a).min(clip(r, 1.0 - eps, 1.0 + eps) * a);
    }
    Ok(total / batch.len() as f64)
}

/// Ablation: the clipped term evaluated per control parameter, with per-step
/// conditional ratios and the sequence advantage broadcast to every step.
pub fn per_step_loss(
    batch: &[WeightedSequence],
    params: &PolicyParameters,
    shape: &TaskShape,
    eps: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for item in batch {
        let lp_steps = policy::log_prob_steps(params, shape, &item.actions)?;
        for (lp, lp_old) in lp_steps.iter().zip(&item.logprob_old_steps) {
            let r = (lp - lp_old).exp();
            let a = item.advantage;
            total += (r * a).min(clip(r, 1.0 - eps, 1.0 + eps) * a);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Gradient coefficient of one clipped term with respect to its log-prob:
/// r*A when the unclipped branch is active or r is inside the clip window,
/// zero when the clipped branch saturates.
fn clip_grad_coeff(r: f64, a: f64, eps: f64) -> f64 {
    let unclipped = r * a;
    let clipped = clip(r, 1.0 - eps, 1.0 + eps) * a;
    if unclipped <= clipped {
        r * a
    } else if (1.0 - eps..=1.0 + eps).contains(&r) {
        r * a
    } else {
        0.0
    }
}

/// (loss, gradient of loss w.r.t. the flat parameter vector).
pub fn loss_and_gradient(
    batch: &[WeightedSequence],
    params: &PolicyParameters,
    shape: &TaskShape,
    eps: f64,
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    let n_params = params.layout.n_params();
    let total_steps: usize = batch.iter().map(|b| b.actions.len()).sum();

    // Fixed chunking plus ordered sequential reduction keeps the result
    // independent of rayon's scheduling.
    let chunk = 16usize;
    let pieces: Vec<Result<(f64, f64, Vec<f64>)>> = batch
        .par_chunks(chunk)
        .map(|items| {
            let mut loss = 0.0;
            let mut count = 0.0;
            let mut grad = vec![0.0; n_params];
            for item in items {
                let lp_steps = policy::log_prob_steps(params, shape, &item.actions)?;
                let a = item.advantage;
                let weights: Vec<f64> = match mode {
                    LossMode::Sequence => {
                        let lp: f64 = lp_steps.iter().sum();
                        let r = (lp - item.logprob_old()).exp();
                        loss += (r * a).min(clip(r, 1.0 - eps, 1.0 + eps) * a);
                        count += 1.0;
                        let coeff = clip_grad_coeff(r, a, eps);
                        vec![coeff; item.actions.len()]
                    }
                    LossMode::PerStep => lp_steps
                        .iter()
                        .zip(&item.logprob_old_steps)
                        .map(|(lp, lp_old)| {
                            let r = (lp - lp_old).exp();
                            loss += (r * a).min(clip(r, 1.0 - eps, 1.0 + eps) * a);
                            count += 1.0;
                            clip_grad_coeff(r, a, eps)
                        })
                        .collect(),
                };
                let g = policy::backward(params, shape, &item.actions, &weights)?;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            Ok((loss, count, grad))
        })
        .collect();

    let mut loss = 0.0;
    let mut count = 0.0;
    let mut grad = vec![0.0; n_params];
    for piece in pieces {
        let (l, c, g) = piece?;
        loss += l;
        count += c;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    let denom = match mode {
        LossMode::Sequence => batch.len() as f64,
        LossMode::PerStep => total_steps as f64,
    };
    debug_assert!((count - denom).abs() < 0.5);
    for v in &mut grad {
        *v /= denom;
    }
    Ok((loss / denom, grad))
}

/// Empirical mean raw reward of uniformly random sequences; used only for
/// reporting shifted rewards.
pub fn estimate_reward_shift(
    env: &dyn ControlEnvironment,
    n_rollouts: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<f64> {
    let steps = env.steps();
    let sequences: Vec<ControlSequence> = (0..n_rollouts)
        .map(|_| (0..steps).map(|_| env.uniform_step(rng)).collect())
        .collect();
    let rewards: Vec<Result<f64>> = sequences.par_iter().map(|s| env.score(s)).collect();
    let mut total = 0.0;
    for r in rewards {
        total += r?;
    }
    Ok(total / n_rollouts as f64)
}

/// Per-iteration metrics emitted by the trainer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub best_reward_raw: f64,
    pub mean_reward_raw: f64,
    pub best_reward_shifted: f64,
    pub mean_reward_shifted: f64,
    pub memory_avg: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub alpha_last: f64,
    pub wallclock_ms: u64,
    pub best_sequence_so_far: ControlSequence,
}

pub struct Trainer<'a> {
    env: &'a dyn ControlEnvironment,
    cfg: TrainerConfig,
    shape: TaskShape,
    pub params: PolicyParameters,
    old_params: PolicyParameters,
    pub memory: MemoryBuffer,
    adapt: AdaptState,
    adam: AdamState,
    epsilon: f64,
    rng: rand_chacha::ChaCha12Rng,
    pub reward_shift: f64,
    iteration: usize,
    best_so_far: Option<SampledSequence>,
}

impl<'a> Trainer<'a> {
    pub fn new(env: &'a dyn ControlEnvironment, cfg: TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        let shape = env.shape();
        let layout = PolicyLayout::new(cfg.hidden, shape);
        let mut init_rng = chacha_stream(cfg.run_seed, 0);
        let params = PolicyParameters::init(layout, cfg.sigma_init, &mut init_rng);
        let mut shift_rng = chacha_stream(cfg.run_seed, 1);
        let reward_shift = estimate_reward_shift(env, cfg.shift_rollouts, &mut shift_rng)?;
        let rng = chacha_stream(cfg.run_seed, 2);
        Ok(Self {
            env,
            shape,
            old_params: params.clone(),
            adam: AdamState::new(params.layout.n_params()),
            memory: MemoryBuffer::new(cfg.memory_size),
            adapt: AdaptState::new(),
            epsilon: cfg.clip_epsilon,
            params,
            rng,
            reward_shift,
            iteration: 0,
            best_so_far: None,
            cfg,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn best_so_far(&self) -> Option<&SampledSequence> {
        self.best_so_far.as_ref()
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    /// One outer iteration; returns the metrics record.
    pub fn step(&mut self) -> Result<RunRecord> {
        let start = std::time::Instant::now();
        let steps = self.env.steps();

        // 1. Sample a fresh batch under the current (= snapshot) parameters.
        let mut batch: Vec<SampledSequence> = (0..self.cfg.batch_size)
            .map(|_| policy::sample_sequence(&self.params, &self.shape, steps, &mut self.rng))
            .collect();

        // 2. Score it (pure, batch-parallel).
        let rewards: Vec<Result<f64>> =
            batch.par_iter().map(|s| self.env.score(&s.actions)).collect();
        for (seq, reward) in batch.iter_mut().zip(rewards) {
            seq.reward_raw = reward?;
        }

        // 3. Update the memory of best sequences.
        let was_full = self.memory.len() == self.memory.capacity();
        let prev_avg = self.memory.average_reward();
        self.memory.update(&batch);
        // Once the buffer is full, merging can only replace entries with
        // better ones, so the average is monotone from then on.
        if was_full {
            if let (Some(prev), Some(now)) = (prev_avg, self.memory.average_reward()) {
                debug_assert!(now >= prev - 1e-15, "memory average decreased");
            }
        }

        // Track the single best sequence overall.
        for seq in &batch {
            if self
                .best_so_far
                .as_ref()
                .map(|b| seq.reward_raw > b.reward_raw)
                .unwrap_or(true)
            {
                self.best_so_far = Some(seq.clone());
            }
        }

        let best_reward = self
            .memory
            .best_reward()
            .into_iter()
            .chain(batch.iter().map(|s| s.reward_raw))
            .chain(self.best_so_far.as_ref().map(|b| b.reward_raw))
            .fold(f64::NEG_INFINITY, f64::max);

        // 4. Re-weight C union M against the snapshot and optimize.
        let train_set: Vec<(ControlSequence, f64)> = batch
            .iter()
            .chain(self.memory.entries())
            .map(|s| (s.actions.clone(), s.reward_raw))
            .collect();
        let old = &self.old_params;
        let shape = self.shape;
        let weighted: Vec<Result<WeightedSequence>> = train_set
            .par_iter()
            .map(|(actions, reward)| {
                let lp_old = policy::log_prob_steps(old, &shape, actions)?;
                Ok(WeightedSequence {
                    actions: actions.clone(),
                    logprob_old_steps: lp_old,
                    advantage: advantage(*reward, best_reward),
                })
            })
            .collect();
        let weighted: Vec<WeightedSequence> =
            weighted.into_iter().collect::<Result<Vec<_>>>()?;

        for _ in 0..self.cfg.inner_iters {
            let (loss, grad) = loss_and_gradient(
                &weighted,
                &self.params,
                &self.shape,
                self.epsilon,
                self.cfg.loss_mode,
            )?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(QctrlError::NonFiniteLoss { iteration: self.iteration });
            }
            adam_step(&mut self.params.data, &grad, &mut self.adam, self.cfg.learning_rate)?;
        }

        // 5. Snapshot.
        self.old_params = self.params.clone();

        // 6. Adaptation bookkeeping.
        let memory_avg = self.memory.average_reward().unwrap_or(0.0);
        self.adapt.record(memory_avg);
        self.iteration += 1;
        if self.iteration % self.cfg.window_length == 0 && self.adapt.ready(self.cfg.window_length)
        {
            let alpha = self.adapt.change_parameter(self.cfg.window_length, self.cfg.alpha_clip);
            self.params.sigma = (self.params.sigma * alpha).max(self.cfg.sigma_min);
            self.old_params.sigma = self.params.sigma;
            self.epsilon = (self.epsilon * alpha).max(self.cfg.epsilon_floor);
        }

        let batch_best = batch.iter().map(|s| s.reward_raw).fold(f64::NEG_INFINITY, f64::max);
        let batch_mean = batch.iter().map(|s| s.reward_raw).sum::<f64>() / batch.len() as f64;
        Ok(RunRecord {
            iteration: self.iteration,
            best_reward_raw: self.best_so_far.as_ref().map(|b| b.reward_raw).unwrap_or(batch_best),
            mean_reward_raw: batch_mean,
            best_reward_shifted: self
                .best_so_far
                .as_ref()
                .map(|b| b.reward_raw - self.reward_shift)
                .unwrap_or(batch_best - self.reward_shift),
            mean_reward_shifted: batch_mean - self.reward_shift,
            memory_avg,
            sigma: self.params.sigma,
            epsilon: self.epsilon,
            alpha_last: self.adapt.last_alpha,
            wallclock_ms: start.elapsed().as_millis() as u64,
            best_sequence_so_far: self
                .best_so_far
                .as_ref()
                .map(|b| b.actions.clone())
                .unwrap_or_default(),
        })
    }

    /// Run to max_iterations, invoking the sink after every iteration.
    pub fn run(&mut self, mut on_record: impl FnMut(&RunRecord)) -> Result<Vec<RunRecord>> {
        let mut records = Vec::with_capacity(self.cfg.max_iterations);
        for _ in 0..self.cfg.max_iterations {
            let record = self.step()?;
            on_record(&record);
            records.push(record);
        }
        Ok(records)
    }
}

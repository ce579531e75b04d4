//! Stochastic sequence policy: a two-layer LSTM with a softmax head over the
//! discrete choices and, for continuous tasks, one mean head per choice.
//!
//! Sampling is autoregressive on the realized actions, log-probabilities use
//! the full mixture density at the raw draws, and gradients are computed by
//! hand-rolled backpropagation through time. The global scale sigma is shared
//! across steps and mixture components and is scheduled by the trainer, not
//! learned.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::sequence::{ActionStep, ControlSequence, SampledSequence, TaskShape};

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_SIGMA_MIN: f64 = 1e-3;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyLayout {
    pub hidden: usize,
    pub n_choices: usize,
    pub n_values: usize,
}

/// Named tensor boundaries inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct TensorSpec {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl PolicyLayout {
    pub fn new(hidden: usize, shape: TaskShape) -> Self {
        Self { hidden, n_choices: shape.n_choices, n_values: shape.n_values }
    }

    /// Policy input width: one-hot previous choice, scaled previous values,
    /// start flag.
    pub fn in_dim(&self) -> usize {
        self.n_choices + self.n_values + 1
    }

    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let h = self.hidden;
        let mut specs = Vec::new();
        let mut offset = 0;
        let mut push = |name: &'static str, rows: usize, cols: usize, offset: &mut usize| {
            specs.push(TensorSpec { name, rows, cols, offset: *offset });
            *offset += rows * cols;
        };
        push("l1.wx", 4 * h, self.in_dim(), &mut offset);
        push("l1.wh", 4 * h, h, &mut offset);
        push("l1.b", 4 * h, 1, &mut offset);
        push("l2.wx", 4 * h, h, &mut offset);
        push("l2.wh", 4 * h, h, &mut offset);
        push("l2.b", 4 * h, 1, &mut offset);
        push("head.w", self.n_choices, h, &mut offset);
        push("head.b", self.n_choices, 1, &mut offset);
        if self.n_values > 0 {
            push("mean.w", self.n_choices * self.n_values, h, &mut offset);
            push("mean.b", self.n_choices * self.n_values, 1, &mut offset);
        }
        specs
    }

    pub fn n_params(&self) -> usize {
        self.tensor_specs()
            .last()
            .map(|s| s.offset + s.rows * s.cols)
            .unwrap_or(0)
    }

    fn offset(&self, name: &str) -> usize {
        self.tensor_specs()
            .into_iter()
            .find(|s| s.name == name)
            .map(|s| s.offset)
            .expect("tensor name")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub layout: PolicyLayout,
    pub data: Vec<f64>,
    pub sigma: f64,
}

impl PolicyParameters {
    /// Seeded init: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    /// biases zero except the forget gates at 1.0.
    pub fn init(layout: PolicyLayout, sigma: f64, rng: &mut dyn rand::RngCore) -> Self {
        let mut data = vec![0.0; layout.n_params()];
        for spec in layout.tensor_specs() {
            if spec.cols == 1 {
                continue; // bias
            }
            let bound = 1.0 / (spec.cols as f64).sqrt();
            for v in &mut data[spec.offset..spec.offset + spec.rows * spec.cols] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let h = layout.hidden;
        for b_name in ["l1.b", "l2.b"] {
            let off = layout.offset(b_name);
            for v in &mut data[off + h..off + 2 * h] {
                *v = 1.0; // forget gate block
            }
        }
        Self { layout, data, sigma }
    }

    pub fn zeros(layout: PolicyLayout, sigma: f64) -> Self {
        let n = layout.n_params();
        Self { layout, data: vec![0.0; n], sigma }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scale the nominal action-value range to [-1, 1] for the policy input.
fn encode_input(layout: &PolicyLayout, shape: &TaskShape, prev: Option<&ActionStep>) -> Vec<f64> {
    let mut x = vec![0.0; layout.in_dim()];
    match prev {
        None => {
            *x.last_mut().unwrap() = 1.0; // start flag
        }
        Some(step) => {
            x[step.choice] = 1.0;
            for (d, &v) in step.values.iter().enumerate() {
                x[layout.n_choices + d] = (v / shape.value_scale).clamp(-1.0, 1.0);
            }
        }
    }
    x
}

/// Everything the backward pass needs per step, per layer.
struct CellCache {
    x: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    c_prev: Vec<f64>,
    h: Vec<f64>,
    h_prev: Vec<f64>,
}

/// Per-step head outputs.
#[derive(Debug, Clone)]
pub struct HeadOutput {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    /// means[choice * n_values + d]
    pub means: Vec<f64>,
}

struct ForwardPass {
    caches: Vec<[CellCache; 2]>,
    heads: Vec<HeadOutput>,
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] += acc;
    }
}

/// y += W^T d  (accumulate transposed matvec).
fn matvec_t(w: &[f64], rows: usize, cols: usize, d: &[f64], y: &mut [f64]) {
    for r in 0..rows {
        let dr = d[r];
        if dr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for c in 0..cols {
            y[c] += row[c] * dr;
        }
    }
}

/// W_grad += d x^T.
fn outer_acc(grad: &mut [f64], rows: usize, cols: usize, d: &[f64], x: &[f64]) {
    for r in 0..rows {
        let dr = d[r];
        if dr == 0.0 {
            continue;
        }
        let row = &mut grad[r * cols..(r + 1) * cols];
        for c in 0..cols {
            row[c] += dr * x[c];
        }
    }
}

fn run_cell(
    params: &PolicyParameters,
    wx_name: &str,
    wh_name: &str,
    b_name: &str,
    in_dim: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> CellCache {
    let hdim = params.layout.hidden;
    let wx = &params.data[params.layout.offset(wx_name)..];
    let wh = &params.data[params.layout.offset(wh_name)..];
    let b = &params.data[params.layout.offset(b_name)..];
    let mut pre = b[..4 * hdim].to_vec();
    matvec(&wx[..4 * hdim * in_dim], 4 * hdim, in_dim, x, &mut pre);
    matvec(&wh[..4 * hdim * hdim], 4 * hdim, hdim, h_prev, &mut pre);
    let mut i = vec![0.0; hdim];
    let mut f = vec![0.0; hdim];
    let mut g = vec![0.0; hdim];
    let mut o = vec![0.0; hdim];
    for k in 0..hdim {
        i[k] = sigmoid(pre[k]);
        f[k] = sigmoid(pre[hdim + k]);
        g[k] = pre[2 * hdim + k].tanh();
        o[k] = sigmoid(pre[3 * hdim + k]);
    }
    let mut c = vec![0.0; hdim];
    let mut h = vec![0.0; hdim];
    for k in 0..hdim {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        h[k] = o[k] * c[k].tanh();
    }
    CellCache {
        x: x.to_vec(),
        i,
        f,
        g,
        o,
        c,
        c_prev: c_prev.to_vec(),
        h,
        h_prev: h_prev.to_vec(),
    }
}

fn head_output(params: &PolicyParameters, h2: &[f64]) -> HeadOutput {
    let layout = &params.layout;
    let hdim = layout.hidden;
    let k = layout.n_choices;
    let mut logits = params.data[layout.offset("head.b")..layout.offset("head.b") + k].to_vec();
    matvec(
        &params.data[layout.offset("head.w")..layout.offset("head.w") + k * hdim],
        k,
        hdim,
        h2,
        &mut logits,
    );
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let means = if layout.n_values > 0 {
        let rows = k * layout.n_values;
        let mut m =
            params.data[layout.offset("mean.b")..layout.offset("mean.b") + rows].to_vec();
        matvec(
            &params.data[layout.offset("mean.w")..layout.offset("mean.w") + rows * hdim],
            rows,
            hdim,
            h2,
            &mut m,
        );
        m
    } else {
        Vec::new()
    };
    HeadOutput { probs, logits, means }
}

fn forward_pass(
    params: &PolicyParameters,
    shape: &TaskShape,
    inputs: &[Vec<f64>],
) -> ForwardPass {
    let layout = &params.layout;
    let hdim = layout.hidden;
    let mut h1 = vec![0.0; hdim];
    let mut c1 = vec![0.0; hdim];
    let mut h2 = vec![0.0; hdim];
    let mut c2 = vec![0.0; hdim];
    let mut caches = Vec::with_capacity(inputs.len());
    let mut heads = Vec::with_capacity(inputs.len());
    let _ = shape;
    for x in inputs {
        let cell1 = run_cell(params, "l1.wx", "l1.wh", "l1.b", layout.in_dim(), x, &h1, &c1);
        let cell2 = run_cell(params, "l2.wx", "l2.wh", "l2.b", hdim, &cell1.h, &h2, &c2);
        h1 = cell1.h.clone();
        c1 = cell1.c.clone();
        h2 = cell2.h.clone();
        c2 = cell2.c.clone();
        heads.push(head_output(params, &h2));
        caches.push([cell1, cell2]);
    }
    ForwardPass { caches, heads }
}

/// Per-step head outputs for an arbitrary input sequence (teacher forcing is
/// applied when the inputs come from a realized action sequence).
pub fn forward(params: &PolicyParameters, shape: &TaskShape, inputs: &[Vec<f64>]) -> Vec<HeadOutput> {
    forward_pass(params, shape, inputs).heads
}

fn inputs_for(params: &PolicyParameters, shape: &TaskShape, actions: &[ActionStep]) -> Vec<Vec<f64>> {
    let mut inputs = Vec::with_capacity(actions.len());
    inputs.push(encode_input(&params.layout, shape, None));
    for step in &actions[..actions.len().saturating_sub(1)] {
        inputs.push(encode_input(&params.layout, shape, Some(step)));
    }
    inputs
}

/// log N(v | mu, sigma^2 I) for the value vector of one mixture component.
fn log_normal(values: &[f64], means: &[f64], sigma: f64) -> f64 {
    let mut acc = 0.0;
    for (v, m) in values.iter().zip(means) {
        let z = (v - m) / sigma;
        acc += -0.5 * z * z - sigma.ln() - 0.5 * LN_2PI;
    }
    acc
}

/// Per-step log-density of one realized step under the head output.
fn step_log_prob(shape: &TaskShape, head: &HeadOutput, step: &ActionStep, sigma: f64) -> f64 {
    if shape.n_values == 0 {
        head.probs[step.choice].ln()
    } else {
        // log sum_i p_i N(values | mu_i, sigma^2 I), in log space.
        let d = shape.n_values;
        let mut terms = Vec::with_capacity(shape.n_choices);
        for i in 0..shape.n_choices {
            let mu = &head.means[i * d..(i + 1) * d];
            terms.push(head.probs[i].max(1e-300).ln() + log_normal(&step.values, mu, sigma));
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }
}

/// Per-step log p(c_t | c_<t) for a realized sequence.
pub fn log_prob_steps(
    params: &PolicyParameters,
    shape: &TaskShape,
    actions: &[ActionStep],
) -> Result<Vec<f64>> {
    check_shape(shape, actions)?;
    let inputs = inputs_for(params, shape, actions);
    let heads = forward(params, shape, &inputs);
    Ok(heads
        .iter()
        .zip(actions)
        .map(|(head, step)| step_log_prob(shape, head, step, params.sigma))
        .collect())
}

pub fn log_prob(params: &PolicyParameters, shape: &TaskShape, actions: &[ActionStep]) -> Result<f64> {
    Ok(log_prob_steps(params, shape, actions)?.iter().sum())
}

fn check_shape(shape: &TaskShape, actions: &[ActionStep]) -> Result<()> {
    for step in actions {
        if step.choice >= shape.n_choices || step.values.len() != shape.n_values {
            return Err(QctrlError::ShapeMismatch(format!(
                "step with choice {} / {} values does not fit task ({} choices, {} values)",
                step.choice,
                step.values.len(),
                shape.n_choices,
                shape.n_values
            )));
        }
    }
    Ok(())
}

/// Draw a full sequence autoregressively; logprob_old is recorded under the
/// generating parameters, reward_raw is left for the environment to fill.
pub fn sample_sequence(
    params: &PolicyParameters,
    shape: &TaskShape,
    steps: usize,
    rng: &mut dyn rand::RngCore,
) -> SampledSequence {
    let layout = &params.layout;
    let hdim = layout.hidden;
    let mut h1 = vec![0.0; hdim];
    let mut c1 = vec![0.0; hdim];
    let mut h2 = vec![0.0; hdim];
    let mut c2 = vec![0.0; hdim];
    let mut actions: ControlSequence = Vec::with_capacity(steps);
    let mut logprob = 0.0;
    let mut prev: Option<ActionStep> = None;
    for _ in 0..steps {
        let x = encode_input(layout, shape, prev.as_ref());
        let cell1 = run_cell(params, "l1.wx", "l1.wh", "l1.b", layout.in_dim(), &x, &h1, &c1);
        let cell2 = run_cell(params, "l2.wx", "l2.wh", "l2.b", hdim, &cell1.h, &h2, &c2);
        h1 = cell1.h;
        c1 = cell1.c;
        h2 = cell2.h.clone();
        c2 = cell2.c.clone();
        let head = head_output(params, &h2);

        let u: f64 = rng.gen();
        let mut choice = shape.n_choices - 1;
        let mut acc = 0.0;
        for (k, p) in head.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = k;
                break;
            }
        }
        let values: Vec<f64> = (0..shape.n_values)
            .map(|d| {
                let mu = head.means[choice * shape.n_values + d];
                let z: f64 = rng.sample(StandardNormal);
                mu + params.sigma * z
            })
            .collect();
        let step = ActionStep { choice, values };
        logprob += step_log_prob(shape, &head, &step, params.sigma);
        prev = Some(step.clone());
        actions.push(step);
    }
    SampledSequence { actions, logprob_old: logprob, reward_raw: 0.0 }
}

/// Gradient of sum_t w_t * log p(c_t | c_<t) with respect to the flat
/// parameter vector, by reverse accumulation through time.
pub fn backward(
    params: &PolicyParameters,
    shape: &TaskShape,
    actions: &[ActionStep],
    step_weights: &[f64],
) -> Result<Vec<f64>> {
    check_shape(shape, actions)?;
    assert_eq!(step_weights.len(), actions.len());
    let layout = &params.layout;
    let hdim = layout.hidden;
    let k = layout.n_choices;
    let d = layout.n_values;
    let sigma = params.sigma;

    let inputs = inputs_for(params, shape, actions);
    let pass = forward_pass(params, shape, &inputs);

    let mut grad = vec![0.0; layout.n_params()];
    let mut dh = [vec![0.0; hdim], vec![0.0; hdim]];
    let mut dc = [vec![0.0; hdim], vec![0.0; hdim]];

    for t in (0..actions.len()).rev() {
        let head = &pass.heads[t];
        let step = &actions[t];
        let w = step_weights[t];

        // Head gradients for w * log p_t.
        let mut dz = vec![0.0; k];
        let mut dmu = vec![0.0; k * d];
        if d == 0 {
            for j in 0..k {
                let ind = if j == step.choice { 1.0 } else { 0.0 };
                dz[j] = w * (ind - head.probs[j]);
            }
        } else {
            // Responsibilities of the mixture at the raw values.
            let mut terms = Vec::with_capacity(k);
            for i in 0..k {
                let mu = &head.means[i * d..(i + 1) * d];
                terms.push(head.probs[i].max(1e-300).ln() + log_normal(&step.values, mu, sigma));
            }
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = terms.iter().map(|t| (t - max).exp()).sum();
            for i in 0..k {
                let resp = (terms[i] - max).exp() / total;
                dz[i] = w * (resp - head.probs[i]);
                for dd in 0..d {
                    let mu = head.means[i * d + dd];
                    dmu[i * d + dd] = w * resp * (step.values[dd] - mu) / (sigma * sigma);
                }
            }
        }

        // Into h2 of the top layer.
        let h2 = &pass.caches[t][1].h;
        let head_w = &params.data[layout.offset("head.w")..layout.offset("head.w") + k * hdim];
        outer_acc(&mut grad[layout.offset("head.w")..], k, hdim, &dz, h2);
        for j in 0..k {
            grad[layout.offset("head.b") + j] += dz[j];
        }
        matvec_t(head_w, k, hdim, &dz, &mut dh[1]);
        if d > 0 {
            let rows = k * d;
            let mean_w =
                &params.data[layout.offset("mean.w")..layout.offset("mean.w") + rows * hdim];
            outer_acc(&mut grad[layout.offset("mean.w")..], rows, hdim, &dmu, h2);
            for j in 0..rows {
                grad[layout.offset("mean.b") + j] += dmu[j];
            }
            matvec_t(mean_w, rows, hdim, &dmu, &mut dh[1]);
        }

        // BPTT through layer 2 then layer 1.
        for layer in (0..2).rev() {
            let cache = &pass.caches[t][layer];
            let in_dim = if layer == 0 { layout.in_dim() } else { hdim };
            let (wx_name, wh_name, b_name) = if layer == 0 {
                ("l1.wx", "l1.wh", "l1.b")
            } else {
                ("l2.wx", "l2.wh", "l2.b")
            };
            let mut da = vec![0.0; 4 * hdim];
            let mut dc_prev = vec![0.0; hdim];
            for kk in 0..hdim {
                let tanh_c = cache.c[kk].tanh();
                let dck = dc[layer][kk] + dh[layer][kk] * cache.o[kk] * (1.0 - tanh_c * tanh_c);
                let dok = dh[layer][kk] * tanh_c;
                let dik = dck * cache.g[kk];
                let dfk = dck * cache.c_prev[kk];
                let dgk = dck * cache.i[kk];
                dc_prev[kk] = dck * cache.f[kk];
                da[kk] = dik * cache.i[kk] * (1.0 - cache.i[kk]);
                da[hdim + kk] = dfk * cache.f[kk] * (1.0 - cache.f[kk]);
                da[2 * hdim + kk] = dgk * (1.0 - cache.g[kk] * cache.g[kk]);
                da[3 * hdim + kk] = dok * cache.o[kk] * (1.0 - cache.o[kk]);
            }
            outer_acc(&mut grad[layout.offset(wx_name)..], 4 * hdim, in_dim, &da, &cache.x);
            outer_acc(&mut grad[layout.offset(wh_name)..], 4 * hdim, hdim, &da, &cache.h_prev);
            for j in 0..4 * hdim {
                grad[layout.offset(b_name) + j] += da[j];
            }
            // Recurrent gradient into step t-1 of the same layer.
            let wh = &params.data[layout.offset(wh_name)..layout.offset(wh_name) + 4 * hdim * hdim];
            let mut dh_prev = vec![0.0; hdim];
            matvec_t(wh, 4 * hdim, hdim, &da, &mut dh_prev);
            dh[layer] = dh_prev;
            dc[layer] = dc_prev;
            // Input gradient feeds the layer below (ignored at layer 0).
            if layer == 1 {
                let wx =
                    &params.data[layout.offset(wx_name)..layout.offset(wx_name) + 4 * hdim * in_dim];
                matvec_t(wx, 4 * hdim, in_dim, &da, &mut dh[0]);
            }
        }
    }
    Ok(grad)
}

/// Versioned named-tensor checkpoint. serde_json round-trips f64 exactly, so
/// save/load is bit-exact.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layout: PolicyLayout,
    pub sigma: f64,
    pub tensors: Vec<CheckpointTensor>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_params(params: &PolicyParameters) -> Self {
        let tensors = params
            .layout
            .tensor_specs()
            .into_iter()
            .map(|s| CheckpointTensor {
                name: s.name.to_string(),
                shape: [s.rows, s.cols],
                data: params.data[s.offset..s.offset + s.rows * s.cols].to_vec(),
            })
            .collect();
        Self { version: CHECKPOINT_VERSION, layout: params.layout, sigma: params.sigma, tensors }
    }

    pub fn into_params(self) -> Result<PolicyParameters> {
        let mut params = PolicyParameters::zeros(self.layout, self.sigma);
        for spec in self.layout.tensor_specs() {
            let tensor = self
                .tensors
                .iter()
                .find(|t| t.name == spec.name)
                .ok_or_else(|| QctrlError::ShapeMismatch(format!("missing tensor {}", spec.name)))?;
            if tensor.shape != [spec.rows, spec.cols] {
                return Err(QctrlError::ShapeMismatch(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    spec.name,
                    tensor.shape,
                    [spec.rows, spec.cols]
                )));
            }
            params.data[spec.offset..spec.offset + spec.rows * spec.cols]
                .copy_from_slice(&tensor.data);
        }
        Ok(params)
    }
}

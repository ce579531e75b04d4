//! Quantum-memory environment: one controlled qubit coupled to a spin bath.
//!
//! A control sequence picks, per time step, a rotation of the system qubit
//! (axis and angle, at varying levels of freedom depending on the task). The
//! score measures how close the total evolution is to "identity on the
//! system, anything on the bath".

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::linalg::{
    kron, kron_all, partial_trace_system, pauli, propagator, trace_norm, ComplexOperator, Pauli,
};
use crate::rng::SplitMix64;
use crate::sequence::{ActionStep, ControlEnvironment, TaskShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdTask {
    Discrete,
    SemiContinuous,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdConfig {
    pub n_bath_qubits: usize,
    pub delta_t: f64,
    pub total_time: f64,
    pub noise_seed: u64,
    pub noise_strength: f64,
    pub max_body: usize,
}

impl Default for DdConfig {
    fn default() -> Self {
        Self {
            n_bath_qubits: 4,
            delta_t: 0.002,
            total_time: 0.064,
            noise_seed: 42,
            noise_strength: 1.0,
            max_body: 3,
        }
    }
}

impl DdConfig {
    pub fn steps(&self) -> usize {
        (self.total_time / self.delta_t).round() as usize
    }

    pub fn dim_bath(&self) -> usize {
        1 << self.n_bath_qubits
    }

    pub fn dim_total(&self) -> usize {
        2 * self.dim_bath()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bath_qubits < 1 {
            return Err(QctrlError::ConfigInvalid("n_bath_qubits must be >= 1".into()));
        }
        let steps = self.steps();
        if steps < 1 {
            return Err(QctrlError::ConfigInvalid("steps must be >= 1".into()));
        }
        if (steps as f64 * self.delta_t - self.total_time).abs() > 1e-12 {
            return Err(QctrlError::ConfigInvalid(format!(
                "total_time {} is not an integer multiple of delta_t {}",
                self.total_time, self.delta_t
            )));
        }
        if self.noise_strength < 0.0 {
            return Err(QctrlError::ConfigInvalid("noise_strength must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-step control at the three levels of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DdAction {
    Discrete { axis: usize },
    SemiContinuous { axis: usize, dalpha: f64 },
    Continuous { axis: usize, dalpha: f64, dtheta: f64, dphi: f64 },
}

impl DdAction {
    pub fn from_step(task: DdTask, step: &ActionStep) -> Self {
        match task {
            DdTask::Discrete => DdAction::Discrete { axis: step.choice },
            DdTask::SemiContinuous => {
                DdAction::SemiContinuous { axis: step.choice, dalpha: step.values[0] }
            }
            DdTask::Continuous => DdAction::Continuous {
                axis: step.choice,
                dalpha: step.values[0],
                dtheta: step.values[1],
                dphi: step.values[2],
            },
        }
    }
}

/// (sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)).
pub fn bloch_axis(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Bloch angles of the Pauli axes; axis 0 has no meaningful direction.
fn pauli_base_angles(axis: usize) -> (f64, f64) {
    match axis {
        1 => (PI / 2.0, 0.0),
        2 => (PI / 2.0, PI / 2.0),
        3 => (0.0, 0.0),
        _ => (0.0, 0.0),
    }
}

fn clamp_deviation(x: f64) -> f64 {
    x.clamp(-PI, PI)
}

/// Resolve an action into a rotation axis and angle. Axis 0 is an exact
/// no-pulse (alpha = 0) in every variant.
pub fn resolve_action(action: &DdAction) -> ([f64; 3], f64) {
    match action {
        DdAction::Discrete { axis } => {
            if *axis == 0 {
                ([0.0, 0.0, 1.0], 0.0)
            } else {
                let (theta, phi) = pauli_base_angles(*axis);
                (bloch_axis(theta, phi), PI)
            }
        }
        DdAction::SemiContinuous { axis, dalpha } => {
            if *axis == 0 {
                ([0.0, 0.0, 1.0], 0.0)
            } else {
                let (theta, phi) = pauli_base_angles(*axis);
                (bloch_axis(theta, phi), PI + clamp_deviation(*dalpha))
            }
        }
        DdAction::Continuous { axis, dalpha, dtheta, dphi } => {
            if *axis == 0 {
                ([0.0, 0.0, 1.0], 0.0)
            } else {
                let (theta, phi) = pauli_base_angles(*axis);
                let axis_vec = bloch_axis(
                    theta + clamp_deviation(*dtheta),
                    phi + clamp_deviation(*dphi),
                );
                (axis_vec, PI + clamp_deviation(*dalpha))
            }
        }
    }
}

/// Seeded random noise Hamiltonian on system (x) bath.
///
/// All Pauli strings of weight 1..=max_body are enumerated in fixed base-4
/// order (system qubit is the most significant digit), strings supported on
/// the system qubit alone are dropped, and each surviving string gets a
/// SplitMix64 coefficient uniform in [-1, 1). The result is rescaled so its
/// Frobenius norm equals noise_strength * sqrt(dim).
pub fn build_noise_hamiltonian(cfg: &DdConfig) -> ComplexOperator {
    let n = 1 + cfg.n_bath_qubits;
    let dim = 1usize << n;
    let mut rng = SplitMix64::new(cfg.noise_seed);
    let mut h = ComplexOperator::zeros(dim);

    let n_strings = 4usize.pow(n as u32);
    for code in 0..n_strings {
        let mut digits = vec![0usize; n];
        let mut c = code;
        // digit 0 = system qubit, most significant.
        for k in (0..n).rev() {
            digits[k] = c % 4;
            c /= 4;
        }
        let weight = digits.iter().filter(|&&d| d != 0).count();
        if weight == 0 || weight > cfg.max_body {
            continue;
        }
        let bath_weight = digits[1..].iter().filter(|&&d| d != 0).count();
        if bath_weight == 0 {
            // Pure system terms are controllable, not noise.
            continue;
        }
        let coeff = rng.next_symmetric();
        let factors: Vec<ComplexOperator> =
            digits.iter().map(|&d| pauli(Pauli::from_index(d))).collect();
        let refs: Vec<&ComplexOperator> = factors.iter().collect();
        h.add_scaled(&kron_all(&refs), coeff);
    }

    let target = cfg.noise_strength * (dim as f64).sqrt();
    let norm = h.frobenius_norm();
    if norm > 0.0 && target > 0.0 {
        h.scale(num_complex::Complex64::new(target / norm, 0.0))
    } else {
        ComplexOperator::zeros(dim)
    }
}

/// H0 + (alpha / (2 delta_t)) * (n . sigma) (x) I_B.
pub fn step_generator(
    action: &DdAction,
    h0: &ComplexOperator,
    n_bath_qubits: usize,
    delta_t: f64,
) -> Result<ComplexOperator> {
    let dim_b = 1usize << n_bath_qubits;
    if h0.dim() != 2 * dim_b {
        return Err(QctrlError::DimensionMismatch { expected: 2 * dim_b, got: h0.dim() });
    }
    let (axis, alpha) = resolve_action(action);
    if alpha == 0.0 {
        return Ok(h0.clone());
    }
    let mut spin = ComplexOperator::zeros(2);
    spin.add_scaled(&pauli(Pauli::X), axis[0]);
    spin.add_scaled(&pauli(Pauli::Y), axis[1]);
    spin.add_scaled(&pauli(Pauli::Z), axis[2]);
    let mut gen = h0.clone();
    gen.add_scaled(
        &kron(&spin, &ComplexOperator::identity(dim_b)),
        alpha / (2.0 * delta_t),
    );
    Ok(gen)
}

/// Distance D(U, I) of a full evolution operator from "identity on the
/// system", plus the raw reward 1 - D.
pub fn distance_from_identity(u: &ComplexOperator, d_s: usize, d_b: usize) -> Result<(f64, f64)> {
    let reduced = partial_trace_system(u, d_s, d_b)?;
    let radicand = 1.0 - trace_norm(&reduced) / (d_s as f64 * d_b as f64);
    if radicand < -1e-9 {
        eprintln!("warning: distance radicand {radicand:.3e} below -1e-9; clamping");
    }
    let distance = radicand.max(0.0).sqrt();
    Ok((distance, 1.0 - distance))
}

/// Score a full control sequence: later steps act on the left.
pub fn evaluate_sequence(
    actions: &[DdAction],
    cfg: &DdConfig,
    h0: &ComplexOperator,
) -> Result<(f64, f64)> {
    if actions.len() != cfg.steps() {
        return Err(QctrlError::LengthMismatch { expected: cfg.steps(), got: actions.len() });
    }
    let mut u = ComplexOperator::identity(cfg.dim_total());
    for action in actions {
        let gen = step_generator(action, h0, cfg.n_bath_qubits, cfg.delta_t)?;
        let step_u = propagator(&gen, cfg.delta_t)?;
        u = step_u.matmul(&u);
    }
    distance_from_identity(&u, 2, cfg.dim_bath())
}

/// Ready-to-score environment with the noise Hamiltonian built once and the
/// four discrete-pulse propagators cached.
pub struct DdEnvironment {
    cfg: DdConfig,
    task: DdTask,
    h0: ComplexOperator,
    discrete_props: Vec<ComplexOperator>,
}

impl DdEnvironment {
    pub fn new(cfg: DdConfig, task: DdTask) -> Result<Self> {
        cfg.validate()?;
        let h0 = build_noise_hamiltonian(&cfg);
        let discrete_props = (0..4)
            .map(|axis| {
                let gen = step_generator(
                    &DdAction::Discrete { axis },
                    &h0,
                    cfg.n_bath_qubits,
                    cfg.delta_t,
                )?;
                propagator(&gen, cfg.delta_t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, task, h0, discrete_props })
    }

    pub fn config(&self) -> &DdConfig {
        &self.cfg
    }

    pub fn task(&self) -> DdTask {
        self.task
    }

    pub fn noise_hamiltonian(&self) -> &ComplexOperator {
        &self.h0
    }

    /// (distance, raw reward) of a generic action sequence.
    pub fn evaluate_steps(&self, steps: &[ActionStep]) -> Result<(f64, f64)> {
        if steps.len() != self.cfg.steps() {
            return Err(QctrlError::LengthMismatch {
                expected: self.cfg.steps(),
                got: steps.len(),
            });
        }
        if self.task == DdTask::Discrete {
            let mut u = ComplexOperator::identity(self.cfg.dim_total());
            for step in steps {
                u = self.discrete_props[step.choice].matmul(&u);
            }
            return distance_from_identity(&u, 2, self.cfg.dim_bath());
        }
        let actions: Vec<DdAction> =
            steps.iter().map(|s| DdAction::from_step(self.task, s)).collect();
        evaluate_sequence(&actions, &self.cfg, &self.h0)
    }
}

impl ControlEnvironment for DdEnvironment {
    fn steps(&self) -> usize {
        self.cfg.steps()
    }

    fn shape(&self) -> TaskShape {
        match self.task {
            DdTask::Discrete => TaskShape::discrete(4),
            DdTask::SemiContinuous => {
                TaskShape { n_choices: 4, n_values: 1, value_scale: PI, value_low: -1.0 }
            }
            DdTask::Continuous => {
                TaskShape { n_choices: 4, n_values: 3, value_scale: PI, value_low: -1.0 }
            }
        }
    }

    fn score(&self, actions: &[ActionStep]) -> Result<f64> {
        self.evaluate_steps(actions).map(|(_, reward)| reward)
    }
}

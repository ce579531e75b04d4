//! Ground-state transition environment on a small transverse-field Ising
//! chain: piecewise-constant field sequences steer the ground state of H(h_i)
//! toward the ground state of H(h*), scored by squared overlap.

use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::linalg::{
    eig_hermitian, kron_all, overlap, pauli, propagator, ComplexOperator, Pauli, StateVector,
};
use crate::sequence::{ActionStep, ControlEnvironment, TaskShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsingTask {
    Discrete,
    Continuous,
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsingConfig {
    pub l: usize,
    pub j: f64,
    pub g: f64,
    pub h_i: f64,
    pub h_star: f64,
    pub h_max: f64,
    pub delta_t: f64,
    pub total_time: f64,
    pub budget: Option<f64>,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            l: 1,
            j: -1.0,
            g: -1.0,
            h_i: -2.0,
            h_star: 2.0,
            h_max: 4.0,
            delta_t: 0.05,
            total_time: 0.5,
            budget: None,
        }
    }
}

impl IsingConfig {
    pub fn steps(&self) -> usize {
        (self.total_time / self.delta_t).round() as usize
    }

    /// Generator scale for one step. The reference results are stated in
    /// spin-1/2 operator units (S = sigma/2), so a step evolves under
    /// exp(-i (delta_t / 2) H) with H written in Pauli matrices.
    pub fn step_scale(&self) -> f64 {
        0.5 * self.delta_t
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(QctrlError::ConfigInvalid("l must be >= 1".into()));
        }
        if self.h_max <= 0.0 {
            return Err(QctrlError::ConfigInvalid("h_max must be > 0".into()));
        }
        if self.h_i.abs() > self.h_max || self.h_star.abs() > self.h_max {
            return Err(QctrlError::ConfigInvalid(
                "initial and target fields must lie within [-h_max, h_max]".into(),
            ));
        }
        let steps = self.steps();
        if (steps as f64 * self.delta_t - self.total_time).abs() > 1e-12 {
            return Err(QctrlError::ConfigInvalid(format!(
                "total_time {} is not an integer multiple of delta_t {}",
                self.total_time, self.delta_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldAction {
    Discrete { sign: i8 },
    Continuous { sign: i8, dh: f64 },
    Constrained { h: f64 },
}

/// Resolve an action into a concrete field strength in [-h_max, h_max].
pub fn resolve_field(action: &FieldAction, h_max: f64) -> f64 {
    match action {
        FieldAction::Discrete { sign } => *sign as f64 * h_max,
        FieldAction::Continuous { sign, dh } => {
            let s = *sign as f64;
            s * h_max - s * dh.clamp(0.0, h_max)
        }
        FieldAction::Constrained { h } => h.clamp(-h_max, h_max),
    }
}

/// H(J, g, h) with open boundaries on L spins.
pub fn build_ising(j: f64, g: f64, h: f64, l: usize) -> ComplexOperator {
    assert!(l >= 1);
    let dim = 1usize << l;
    let mut ham = ComplexOperator::zeros(dim);
    let embed = |site_ops: &[(usize, Pauli)]| -> ComplexOperator {
        let factors: Vec<ComplexOperator> = (0..l)
            .map(|site| {
                let p = site_ops
                    .iter()
                    .find(|(s, _)| *s == site)
                    .map(|(_, p)| *p)
                    .unwrap_or(Pauli::I);
                pauli(p)
            })
            .collect();
        let refs: Vec<&ComplexOperator> = factors.iter().collect();
        kron_all(&refs)
    };
    for i in 0..l.saturating_sub(1) {
        ham.add_scaled(&embed(&[(i, Pauli::X), (i + 1, Pauli::X)]), j);
    }
    for i in 0..l {
        ham.add_scaled(&embed(&[(i, Pauli::Z)]), g);
        ham.add_scaled(&embed(&[(i, Pauli::X)]), h);
    }
    ham
}

/// Lowest eigenpair; the eigenvector is the deterministic lowest-index
/// representative under the fixed-order Jacobi solver.
pub fn ground_state(h: &ComplexOperator) -> Result<(f64, StateVector)> {
    let (evals, vecs) = eig_hermitian(h)?;
    let d = h.dim();
    let amps = (0..d).map(|i| vecs[(i, 0)]).collect();
    Ok((evals[0], StateVector::new(amps).normalized()))
}

/// S2 of the evolved initial ground state against the target ground state.
pub fn evaluate_sequence(h_seq: &[f64], cfg: &IsingConfig) -> Result<f64> {
    let ev = IsingEvaluator::new(cfg)?;
    ev.s2(h_seq)
}

/// S2 gated by the total-field budget: zero when sum_t |h_t| > B.
pub fn constrained_reward(h_seq: &[f64], cfg: &IsingConfig) -> Result<f64> {
    let budget = cfg
        .budget
        .ok_or_else(|| QctrlError::ConfigInvalid("constrained reward requires a budget".into()))?;
    let total: f64 = h_seq.iter().map(|h| h.abs()).sum();
    if total <= budget + 1e-12 {
        evaluate_sequence(h_seq, cfg)
    } else {
        Ok(0.0)
    }
}

/// Precomputed initial/target ground states plus the two bang-bang
/// propagators; recomputes propagators only for non-extremal fields.
pub struct IsingEvaluator {
    cfg: IsingConfig,
    psi_init: StateVector,
    psi_target: StateVector,
    prop_plus: ComplexOperator,
    prop_minus: ComplexOperator,
}

impl IsingEvaluator {
    pub fn new(cfg: &IsingConfig) -> Result<Self> {
        cfg.validate()?;
        let (_, psi_init) = ground_state(&build_ising(cfg.j, cfg.g, cfg.h_i, cfg.l))?;
        let (_, psi_target) = ground_state(&build_ising(cfg.j, cfg.g, cfg.h_star, cfg.l))?;
        let prop_plus = propagator(&build_ising(cfg.j, cfg.g, cfg.h_max, cfg.l), cfg.step_scale())?;
        let prop_minus =
            propagator(&build_ising(cfg.j, cfg.g, -cfg.h_max, cfg.l), cfg.step_scale())?;
        Ok(Self { cfg: cfg.clone(), psi_init, psi_target, prop_plus, prop_minus })
    }

    pub fn config(&self) -> &IsingConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi_init
    }

    pub fn target_state(&self) -> &StateVector {
        &self.psi_target
    }

    pub fn s2(&self, h_seq: &[f64]) -> Result<f64> {
        let steps = self.cfg.steps();
        if h_seq.len() != steps {
            return Err(QctrlError::LengthMismatch { expected: steps, got: h_seq.len() });
        }
        for &h in h_seq {
            if h.abs() > self.cfg.h_max + 1e-12 {
                return Err(QctrlError::FieldOutOfRange { value: h, h_max: self.cfg.h_max });
            }
        }
        let mut psi = self.psi_init.clone();
        for &h in h_seq {
            psi = if h == self.cfg.h_max {
                self.prop_plus.apply(&psi)
            } else if h == -self.cfg.h_max {
                self.prop_minus.apply(&psi)
            } else {
                propagator(&build_ising(self.cfg.j, self.cfg.g, h, self.cfg.l), self.cfg.step_scale())?
                    .apply(&psi)
            };
        }
        let ov = overlap(&self.psi_target, &psi)?;
        Ok(ov.norm_sqr())
    }

    pub fn reward(&self, h_seq: &[f64]) -> Result<f64> {
        match self.cfg.budget {
            Some(budget) => {
                let total: f64 = h_seq.iter().map(|h| h.abs()).sum();
                if total <= budget + 1e-12 {
                    self.s2(h_seq)
                } else {
                    Ok(0.0)
                }
            }
            None => self.s2(h_seq),
        }
    }
}

/// Scoring surface over generic action steps.
pub struct IsingEnvironment {
    task: IsingTask,
    evaluator: IsingEvaluator,
}

impl IsingEnvironment {
    pub fn new(cfg: IsingConfig, task: IsingTask) -> Result<Self> {
        if task == IsingTask::Constrained && cfg.budget.is_none() {
            return Err(QctrlError::ConfigInvalid(
                "constrained task requires a budget".into(),
            ));
        }
        Ok(Self { task, evaluator: IsingEvaluator::new(&cfg)? })
    }

    pub fn task(&self) -> IsingTask {
        self.task
    }

    pub fn evaluator(&self) -> &IsingEvaluator {
        &self.evaluator
    }

    pub fn field_action(&self, step: &ActionStep) -> FieldAction {
        let sign: i8 = if step.choice == 0 { 1 } else { -1 };
        match self.task {
            IsingTask::Discrete => FieldAction::Discrete { sign },
            IsingTask::Continuous => {
                FieldAction::Continuous { sign, dh: step.values[0].clamp(0.0, self.evaluator.cfg.h_max) }
            }
            IsingTask::Constrained => FieldAction::Constrained {
                h: sign as f64 * step.values[0].abs().clamp(0.0, self.evaluator.cfg.h_max),
            },
        }
    }

    pub fn fields(&self, steps: &[ActionStep]) -> Vec<f64> {
        steps
            .iter()
            .map(|s| resolve_field(&self.field_action(s), self.evaluator.cfg.h_max))
            .collect()
    }
}

impl ControlEnvironment for IsingEnvironment {
    fn steps(&self) -> usize {
        self.evaluator.cfg.steps()
    }

    fn shape(&self) -> TaskShape {
        match self.task {
            IsingTask::Discrete => TaskShape::discrete(2),
            IsingTask::Continuous | IsingTask::Constrained => TaskShape {
                n_choices: 2,
                n_values: 1,
                value_scale: self.evaluator.cfg.h_max,
                value_low: 0.0,
            },
        }
    }

    fn score(&self, actions: &[ActionStep]) -> Result<f64> {
        self.evaluator.reward(&self.fields(actions))
    }
}

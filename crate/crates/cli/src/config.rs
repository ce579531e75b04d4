//! Experiment configuration: scenario/task selection plus the environment and
//! trainer parameter blocks, serialized as a single JSON document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qctrl_core::dd::{DdConfig, DdEnvironment, DdTask};
use qctrl_core::ising::{IsingConfig, IsingEnvironment, IsingTask};
use qctrl_core::sequence::ControlEnvironment;
use qctrl_core::trainer::TrainerConfig;
use qctrl_core::{QctrlError, Result};

pub const OUTPUT_ROOT_ENV: &str = "QCTRL_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    QuantumMemory,
    Ising,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Discrete,
    SemiContinuous,
    Continuous,
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dd: Option<DdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ising: Option<IsingConfig>,
    pub trainer: TrainerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// Either concrete environment behind one trait object.
pub enum Environment {
    Dd(DdEnvironment),
    Ising(IsingEnvironment),
}

impl Environment {
    pub fn as_dyn(&self) -> &dyn ControlEnvironment {
        match self {
            Environment::Dd(env) => env,
            Environment::Ising(env) => env,
        }
    }

    /// Name of the headline metric reported in summaries.
    pub fn headline_metric(&self) -> &'static str {
        match self {
            Environment::Dd(_) => "distance",
            Environment::Ising(_) => "s2",
        }
    }

    /// Headline metric derived from the best raw reward (D = 1 - reward for
    /// the quantum-memory scenario, S2 = reward for ising).
    pub fn headline_value(&self, best_reward: f64) -> f64 {
        match self {
            Environment::Dd(_) => 1.0 - best_reward,
            Environment::Ising(_) => best_reward,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.scenario {
            Scenario::QuantumMemory => {
                if self.dd.is_none() {
                    return Err(QctrlError::ConfigInvalid(
                        "scenario quantum_memory requires the dd block".into(),
                    ));
                }
                if self.ising.is_some() {
                    return Err(QctrlError::ConfigInvalid(
                        "scenario quantum_memory must not set the ising block".into(),
                    ));
                }
                if self.task == Task::Constrained {
                    return Err(QctrlError::ConfigInvalid(
                        "task constrained is only defined for the ising scenario".into(),
                    ));
                }
            }
            Scenario::Ising => {
                if self.ising.is_none() {
                    return Err(QctrlError::ConfigInvalid(
                        "scenario ising requires the ising block".into(),
                    ));
                }
                if self.dd.is_some() {
                    return Err(QctrlError::ConfigInvalid(
                        "scenario ising must not set the dd block".into(),
                    ));
                }
                if self.task == Task::SemiContinuous {
                    return Err(QctrlError::ConfigInvalid(
                        "task semi_continuous is only defined for the quantum_memory scenario"
                            .into(),
                    ));
                }
                if self.task == Task::Constrained {
                    let cfg = self.ising.as_ref().unwrap();
                    if cfg.budget.is_none() {
                        return Err(QctrlError::ConfigInvalid(
                            "task constrained requires ising.budget".into(),
                        ));
                    }
                }
            }
        }
        if let Some(cfg) = &self.dd {
            cfg.validate()?;
        }
        if let Some(cfg) = &self.ising {
            cfg.validate()?;
        }
        self.trainer.validate()?;
        Ok(())
    }

    pub fn build_environment(&self) -> Result<Environment> {
        self.validate()?;
        match self.scenario {
            Scenario::QuantumMemory => {
                let task = match self.task {
                    Task::Discrete => DdTask::Discrete,
                    Task::SemiContinuous => DdTask::SemiContinuous,
                    Task::Continuous => DdTask::Continuous,
                    Task::Constrained => unreachable!("rejected by validate"),
                };
                Ok(Environment::Dd(DdEnvironment::new(self.dd.clone().unwrap(), task)?))
            }
            Scenario::Ising => {
                let task = match self.task {
                    Task::Discrete => IsingTask::Discrete,
                    Task::Continuous => IsingTask::Continuous,
                    Task::Constrained => IsingTask::Constrained,
                    Task::SemiContinuous => unreachable!("rejected by validate"),
                };
                Ok(Environment::Ising(IsingEnvironment::new(self.ising.clone().unwrap(), task)?))
            }
        }
    }

    /// Content hash of the canonical serialized config (the trainer block
    /// includes the run seed), so identical experiments map to one run id.
    pub fn run_id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn output_root(&self) -> String {
        self.output_dir
            .clone()
            .or_else(|| std::env::var(OUTPUT_ROOT_ENV).ok())
            .unwrap_or_else(|| DEFAULT_OUTPUT_ROOT.to_string())
    }
}

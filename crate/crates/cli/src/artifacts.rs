//! Run-directory layout and (de)serialization of the files a run leaves
//! behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qctrl_core::oracle::OracleResult;
use qctrl_core::policy::Checkpoint;
use qctrl_core::sequence::ControlSequence;
use qctrl_core::trainer::RunRecord;
use qctrl_core::{QctrlError, Result};

use crate::config::ExperimentConfig;

pub const CONFIG_SNAPSHOT: &str = "config_snapshot.json";
pub const METRICS: &str = "metrics.jsonl";
pub const BEST_SEQUENCES: &str = "best_sequences.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const SUMMARY: &str = "summary.json";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const SEQUENCES_CSV: &str = "sequences.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestSequence {
    pub rank: usize,
    pub reward: f64,
    pub actions: ControlSequence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub scenario: String,
    pub task: String,
    pub iterations: usize,
    pub best_reward: f64,
    pub headline_metric: String,
    pub headline_value: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    Ok(fs::write(path, body + "\n")?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path)
        .map_err(|_| QctrlError::MissingArtifact(path.display().to_string()))?;
    Ok(serde_json::from_str(&body)?)
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(root: &str, run_id: &str) -> Result<Self> {
        let path = Path::new(root).join(run_id);
        fs::create_dir_all(&path)?;
        Ok(Self { path })
    }

    pub fn open(path: &Path) -> Result<Self> {
        if !path.is_dir() {
            return Err(QctrlError::MissingArtifact(path.display().to_string()));
        }
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_config(&self, config: &ExperimentConfig) -> Result<()> {
        write_json(&self.file(CONFIG_SNAPSHOT), config)
    }

    pub fn read_config(&self) -> Result<ExperimentConfig> {
        read_json(&self.file(CONFIG_SNAPSHOT))
    }

    pub fn write_metrics(&self, records: &[RunRecord]) -> Result<()> {
        let mut body = String::new();
        for record in records {
            body.push_str(&serde_json::to_string(record)?);
            body.push('\n');
        }
        Ok(fs::write(self.file(METRICS), body)?)
    }

    pub fn read_metrics(&self) -> Result<Vec<RunRecord>> {
        let path = self.file(METRICS);
        let body = fs::read_to_string(&path)
            .map_err(|_| QctrlError::MissingArtifact(path.display().to_string()))?;
        body.lines()
            .map(|line| Ok(serde_json::from_str(line)?))
            .collect()
    }

    pub fn write_best_sequences(&self, best: &[BestSequence]) -> Result<()> {
        write_json(&self.file(BEST_SEQUENCES), &best)
    }

    pub fn read_best_sequences(&self) -> Result<Vec<BestSequence>> {
        read_json(&self.file(BEST_SEQUENCES))
    }

    pub fn write_checkpoint(&self, checkpoint: &Checkpoint) -> Result<()> {
        write_json(&self.file(CHECKPOINT), checkpoint)
    }

    pub fn write_summary(&self, summary: &Summary) -> Result<()> {
        write_json(&self.file(SUMMARY), summary)
    }

    pub fn write_oracle(&self, mode: &str, result: &OracleResult) -> Result<PathBuf> {
        let path = self.file(&format!("oracle_{mode}.json"));
        write_json(&path, result)?;
        Ok(path)
    }

    pub fn read_oracle(&self, mode: &str) -> Result<OracleResult> {
        read_json(&self.file(&format!("oracle_{mode}.json")))
    }
}

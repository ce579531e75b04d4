//! The four subcommands: train, oracle, replay, export-plots.

use std::path::Path;

use qctrl_core::oracle::{brute_force, random_search, OracleResult, DEFAULT_BRUTE_FORCE_CAP};
use qctrl_core::policy::Checkpoint;
use qctrl_core::rng::chacha_stream;
use qctrl_core::sequence::{ActionStep, ControlSequence};
use qctrl_core::trainer::Trainer;
use qctrl_core::{QctrlError, Result};

use crate::artifacts::{
    read_json, BestSequence, RunDir, Summary, CONVERGENCE_CSV, SEQUENCES_CSV,
};
use crate::config::{ExperimentConfig, Scenario, Task};

const REPLAY_TOL: f64 = 1e-9;
const TOP_K: usize = 10;

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::QuantumMemory => "quantum_memory",
        Scenario::Ising => "ising",
    }
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Discrete => "discrete",
        Task::SemiContinuous => "semi_continuous",
        Task::Continuous => "continuous",
        Task::Constrained => "constrained",
    }
}

pub fn cmd_train(config_path: &Path) -> Result<RunDir> {
    let config = load_config(config_path)?;
    let environment = config.build_environment()?;
    let run_dir = RunDir::create(&config.output_root(), &config.run_id())?;
    run_dir.write_config(&config)?;

    let mut trainer = Trainer::new(environment.as_dyn(), config.trainer.clone())?;
    let records = trainer.run(|record| {
        if record.iteration % 50 == 0 || record.iteration == 1 {
            eprintln!(
                "iter {:4}  best {:.6}  mean {:.6}  sigma {:.4}",
                record.iteration, record.best_reward_raw, record.mean_reward_raw, record.sigma
            );
        }
    })?;
    run_dir.write_metrics(&records)?;

    let mut best: Vec<BestSequence> = trainer
        .memory
        .entries()
        .iter()
        .take(TOP_K)
        .enumerate()
        .map(|(rank, e)| BestSequence {
            rank,
            reward: e.reward_raw,
            actions: e.actions.clone(),
        })
        .collect();
    if best.is_empty() {
        if let Some(b) = trainer.best_so_far() {
            best.push(BestSequence { rank: 0, reward: b.reward_raw, actions: b.actions.clone() });
        }
    }
    run_dir.write_best_sequences(&best)?;
    run_dir.write_checkpoint(&Checkpoint::from_params(&trainer.params))?;

    let best_reward = best.first().map(|b| b.reward).unwrap_or(f64::NEG_INFINITY);
    let summary = Summary {
        run_id: config.run_id(),
        scenario: scenario_name(config.scenario).to_string(),
        task: task_name(config.task).to_string(),
        iterations: records.len(),
        best_reward,
        headline_metric: environment.headline_metric().to_string(),
        headline_value: environment.headline_value(best_reward),
    };
    run_dir.write_summary(&summary)?;
    println!("{}", run_dir.path.display());
    Ok(run_dir)
}

pub fn cmd_oracle(config_path: &Path, mode: &str, n: u64) -> Result<RunDir> {
    let config = load_config(config_path)?;
    let environment = config.build_environment()?;
    let env = environment.as_dyn();
    let result: OracleResult = match mode {
        "brute" => {
            if env.shape().n_values != 0 {
                return Err(QctrlError::ConfigInvalid(
                    "brute mode requires a discrete task".into(),
                ));
            }
            brute_force(env, env.shape().n_choices, DEFAULT_BRUTE_FORCE_CAP)?
        }
        "random" => {
            let mut rng = chacha_stream(config.trainer.run_seed, 3);
            random_search(env, n, &mut rng)?
        }
        other => {
            return Err(QctrlError::ConfigInvalid(format!(
                "unknown oracle mode '{other}' (expected brute or random)"
            )))
        }
    };
    let run_dir = RunDir::create(&config.output_root(), &config.run_id())?;
    run_dir.write_config(&config)?;
    run_dir.write_oracle(mode, &result)?;
    println!("{:.6}", result.best_reward);
    Ok(run_dir)
}

/// Re-score a stored best sequence from a fresh environment built off the
/// config snapshot; fails if the stored reward no longer reproduces.
pub fn cmd_replay(run_path: &Path, index: usize) -> Result<f64> {
    let run_dir = RunDir::open(run_path)?;
    let config = run_dir.read_config()?;
    let environment = config.build_environment()?;

    let (actions, stored): (ControlSequence, f64) = match run_dir.read_best_sequences() {
        Ok(best) => {
            let entry = best.into_iter().nth(index).ok_or_else(|| {
                QctrlError::MissingArtifact(format!(
                    "best sequence index {index} in {}",
                    run_path.display()
                ))
            })?;
            (entry.actions, entry.reward)
        }
        Err(_) => {
            // Oracle-only run directories hold a single best sequence.
            let result = run_dir
                .read_oracle("brute")
                .or_else(|_| run_dir.read_oracle("random"))?;
            if index != 0 {
                return Err(QctrlError::MissingArtifact(format!(
                    "oracle results hold a single sequence; index {index} not available"
                )));
            }
            (result.best_sequence, result.best_reward)
        }
    };

    let recomputed = environment.as_dyn().score(&actions)?;
    if (recomputed - stored).abs() > REPLAY_TOL {
        return Err(QctrlError::RewardMismatch { stored, recomputed });
    }
    println!("{recomputed:.9}");
    Ok(recomputed)
}

fn format_step(step: &ActionStep) -> String {
    if step.values.is_empty() {
        step.choice.to_string()
    } else {
        let values: Vec<String> = step.values.iter().map(|v| format!("{v:.6}")).collect();
        format!("{}:{}", step.choice, values.join("|"))
    }
}

pub fn cmd_export_plots(run_path: &Path) -> Result<()> {
    let run_dir = RunDir::open(run_path)?;
    let records = run_dir.read_metrics()?;

    let mut convergence = String::from("iteration,best,mean,memory_avg,sigma,epsilon\n");
    for r in &records {
        convergence.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration, r.best_reward_raw, r.mean_reward_raw, r.memory_avg, r.sigma, r.epsilon
        ));
    }
    std::fs::write(run_dir.file(CONVERGENCE_CSV), convergence)?;

    let best = run_dir.read_best_sequences()?;
    let steps = best.first().map(|b| b.actions.len()).unwrap_or(0);
    let mut sequences = String::from("rank,reward");
    for t in 0..steps {
        sequences.push_str(&format!(",step_{t}"));
    }
    sequences.push('\n');
    for entry in best.iter().take(TOP_K) {
        sequences.push_str(&format!("{},{}", entry.rank, entry.reward));
        for step in &entry.actions {
            sequences.push(',');
            sequences.push_str(&format_step(step));
        }
        sequences.push('\n');
    }
    std::fs::write(run_dir.file(SEQUENCES_CSV), sequences)?;
    Ok(())
}

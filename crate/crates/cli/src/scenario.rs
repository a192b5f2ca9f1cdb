//! Builds core simulation objects from a resolved configuration and runs
//! the channel → oracle pipeline that every experiment shares.

use ristrack_core::channel::{evolve_trajectory, ChannelSet};
use ristrack_core::dataio::{oracle_trajectory, synthetic_trajectory, OracleOptions, PhaseTrajectory};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Channel slots plus the per-slot oracle phases that act as ground truth.
pub struct TrackedScenario {
    pub channels: Vec<ChannelSet<f64>>,
    pub oracle: PhaseTrajectory<f64>,
}

pub fn oracle_options(cfg: &ExperimentConfig) -> OracleOptions {
    OracleOptions {
        grid_b: cfg.oracle.grid_b,
        max_sweeps: cfg.oracle.max_sweeps,
        multistart: cfg.oracle.multistart_first_slot,
    }
}

/// Evolves the channel over `n_slots` and solves the per-slot oracle.
pub fn build_tracked_scenario(
    cfg: &ExperimentConfig,
    ris_m: usize,
    k_users: usize,
    n_slots: usize,
    seed: u64,
) -> Result<TrackedScenario, CliError> {
    let params = cfg.channel_params(ris_m)?;
    let mobility = cfg.mobility(k_users, n_slots);
    let channels = evolve_trajectory(&params, &mobility, seed)?;
    let oracle = oracle_trajectory(
        &channels,
        cfg.system.tx_power,
        &oracle_options(cfg),
        cfg.oracle.warm_start,
    )?;
    Ok(TrackedScenario { channels, oracle })
}

/// The phase trajectory the predictor reports train on: the pinned
/// synthetic task by default, or a seeded oracle trajectory when
/// `task.source = "oracle"`.
pub fn task_trajectory(
    cfg: &ExperimentConfig,
    m: usize,
    t_len: usize,
) -> Result<PhaseTrajectory<f64>, CliError> {
    match cfg.task.source.as_str() {
        "synthetic" => Ok(synthetic_trajectory(
            &cfg.synthetic_spec(m, t_len),
            cfg.task.task_seed,
        )?),
        "oracle" => {
            let scenario =
                build_tracked_scenario(cfg, m, cfg.system.k_users, t_len, cfg.task.task_seed)?;
            Ok(scenario.oracle)
        }
        other => Err(CliError::Invalid(format!(
            "unknown task source `{other}` (validation should have caught this)"
        ))),
    }
}

//! Generates a mobile channel trajectory, solves the per-slot oracle and
//! exports the phase trajectory plus debugging artifacts.

use std::path::{Path, PathBuf};

use ristrack_core::dataio::{save_channel_dump, save_trajectory};
use ristrack_core::ris_link::{se_for, PhaseConfig};

use crate::common::{fmt_f, write_report};
use crate::config::ExperimentConfig;
use crate::scenario::build_tracked_scenario;
use crate::CliError;

pub fn run_oracle_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validated()?;
    let scenario = build_tracked_scenario(
        cfg,
        cfg.system.ris_m,
        cfg.system.k_users,
        cfg.schedule.t_slots,
        cfg.seed,
    )?;

    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir)?;

    let trajectory_path = dir.join("oracle_trajectory.csv");
    save_trajectory(&scenario.oracle, &trajectory_path)?;

    let mut se_rows = String::new();
    for (t, channel) in scenario.channels.iter().enumerate() {
        let theta = PhaseConfig::from_phases(scenario.oracle.row(t));
        let se = se_for(channel, &theta, cfg.system.tx_power)?;
        se_rows.push_str(&format!("{t},{}\n", fmt_f(se)));
    }
    let se_path = write_report(
        cfg,
        "oracle-gen",
        "oracle_se.csv",
        &["per-slot sum spectral efficiency of the oracle configuration"],
        &format!("slot,se_nats\n{se_rows}"),
    )?;

    let dump_path = dir.join("channel_slot0.bin");
    save_channel_dump(&scenario.channels[0], &dump_path)?;

    Ok(vec![trajectory_path, se_path, dump_path])
}

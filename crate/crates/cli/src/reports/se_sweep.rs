//! Sum-spectral-efficiency sweeps over the user count and the surface size.
//!
//! Every run evolves a channel, solves the per-slot oracle over the tracked
//! span plus the evaluation span, trains the predictors on the tracked
//! oracle phases, and evaluates each scheme's phases on the true channel of
//! every evaluation slot:
//!
//! - `oracle`: the per-slot optimized phases (upper reference);
//! - predictor schemes: closed-loop forecasts of the tracked phases;
//! - `random_reflection`: uniform phases drawn per slot;
//! - `without_ris`: amplitudes zeroed (β = 0);
//! - `without_direct_link`: direct paths removed and the phases re-optimized
//!   for the reflected-only channel.

use std::path::PathBuf;

use rayon::prelude::*;

use ristrack_core::channel::ChannelSet;
use ristrack_core::dataio::PhaseTrajectory;
use ristrack_core::ensemble::{ensemble_forecast, train_ensemble, BootstrapSpec};
use ristrack_core::reservoir::{forecast, init_lsm, train_readout, InitMode};
use ristrack_core::ris_link::{oracle_optimize_theta, se_for, PhaseConfig};
use ristrack_core::rng::{derive_seed, stream_rng, StreamTag};

use crate::common::{fmt_f, percentile, write_report};
use crate::config::{ExperimentConfig, Scheme};
use crate::scenario::{build_tracked_scenario, oracle_options};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    KUsers,
    RisSize,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::KUsers => "k_users",
            Axis::RisSize => "ris_size",
        }
    }
}

struct RunSpec {
    axis: Axis,
    value: usize,
    seed_index: usize,
    run_seed: u64,
}

struct RunResult {
    axis: Axis,
    value: usize,
    seed_index: usize,
    per_scheme: Vec<(Scheme, f64)>,
}

fn phases_row(traj: &PhaseTrajectory<f64>, row: usize) -> PhaseConfig<f64> {
    PhaseConfig::from_phases(traj.row(row))
}

fn evaluate_run(cfg: &ExperimentConfig, spec: &RunSpec) -> Result<RunResult, CliError> {
    let (m, k) = match spec.axis {
        Axis::KUsers => (cfg.system.ris_m, spec.value),
        Axis::RisSize => (spec.value, cfg.system.k_users),
    };
    let t_tracked = cfg.schedule.t_slots;
    let n_slots = t_tracked + cfg.sweeps.se_eval_horizon;
    let scenario = build_tracked_scenario(cfg, m, k, n_slots, spec.run_seed)?;
    let tracked_oracle = scenario.oracle.prefix(t_tracked);
    let power = cfg.system.tx_power;

    // closed-loop forecasts of the predictor schemes over the eval span
    let horizon = cfg.sweeps.se_eval_horizon;
    let arch = cfg.reservoir_arch(m);
    let mut xavier_fc = None;
    let mut random_fc = None;
    let mut ensemble_fc = None;
    for scheme in &cfg.baselines {
        match scheme {
            Scheme::XavierLsm => {
                let seed = derive_seed(spec.run_seed, StreamTag::Learner, 0xA);
                let model = init_lsm::<f64>(&arch, InitMode::Xavier, seed)?;
                let trained =
                    train_readout(model, &tracked_oracle, cfg.schedule.train_fraction)?;
                xavier_fc = Some(forecast(&trained, &tracked_oracle, horizon)?);
            }
            Scheme::RandomInitLsm => {
                let seed = derive_seed(spec.run_seed, StreamTag::Learner, 0xB);
                let model = init_lsm::<f64>(&arch, InitMode::UniformRandom, seed)?;
                let trained =
                    train_readout(model, &tracked_oracle, cfg.schedule.train_fraction)?;
                random_fc = Some(forecast(&trained, &tracked_oracle, horizon)?);
            }
            Scheme::Ensemble => {
                let bootstrap = BootstrapSpec {
                    block_len: cfg.ensemble.block_len,
                    coverage: cfg.ensemble.coverage,
                    master_seed: derive_seed(spec.run_seed, StreamTag::Learner, 0xC),
                };
                let ens = train_ensemble(
                    &arch,
                    &tracked_oracle,
                    cfg.schedule.train_fraction,
                    cfg.ensemble.m1,
                    &bootstrap,
                )?;
                ensemble_fc = Some(ensemble_forecast(&ens, &tracked_oracle, horizon)?);
            }
            _ => {}
        }
    }

    let opts = oracle_options(cfg);
    let mut per_scheme = Vec::with_capacity(cfg.baselines.len());
    for &scheme in &cfg.baselines {
        let mut total = 0.0;
        for step in 0..horizon {
            let slot = t_tracked + step;
            let channel: &ChannelSet<f64> = &scenario.channels[slot];
            let se = match scheme {
                Scheme::Oracle => {
                    se_for(channel, &phases_row(&scenario.oracle, slot), power)?
                }
                Scheme::Ensemble => se_for(
                    channel,
                    &phases_row(ensemble_fc.as_ref().expect("trained above"), step),
                    power,
                )?,
                Scheme::XavierLsm => se_for(
                    channel,
                    &phases_row(xavier_fc.as_ref().expect("trained above"), step),
                    power,
                )?,
                Scheme::RandomInitLsm => se_for(
                    channel,
                    &phases_row(random_fc.as_ref().expect("trained above"), step),
                    power,
                )?,
                Scheme::RandomReflection => {
                    let mut rng =
                        stream_rng(spec.run_seed, StreamTag::RandomReflection, slot as u64);
                    se_for(channel, &PhaseConfig::uniform_random(m, &mut rng), power)?
                }
                Scheme::WithoutRis => se_for(channel, &PhaseConfig::absorbing(m), power)?,
                Scheme::WithoutDirectLink => {
                    let blocked = channel.without_direct_link();
                    let init = phases_row(&scenario.oracle, slot);
                    let solved = oracle_optimize_theta(
                        &blocked,
                        power,
                        opts.grid_b,
                        opts.max_sweeps,
                        Some(&init),
                    )?;
                    se_for(&blocked, &solved, power)?
                }
            };
            total += se;
        }
        per_scheme.push((scheme, total / horizon as f64));
    }

    Ok(RunResult {
        axis: spec.axis,
        value: spec.value,
        seed_index: spec.seed_index,
        per_scheme,
    })
}

pub struct SweepOutcome {
    pub paths: Vec<PathBuf>,
    /// (axis name, value, scheme, median SE over seeds)
    pub medians: Vec<(String, usize, Scheme, f64)>,
}

pub fn run_se_sweeps(cfg: &ExperimentConfig) -> Result<SweepOutcome, CliError> {
    cfg.validated()?;
    if cfg.baselines.is_empty() {
        return Err(CliError::Invalid("no baselines selected".into()));
    }

    let mut specs = Vec::new();
    let mut run_index = 0u64;
    for &k in &cfg.sweeps.k_list {
        for seed_index in 0..cfg.sweeps.n_seeds {
            specs.push(RunSpec {
                axis: Axis::KUsers,
                value: k,
                seed_index,
                run_seed: derive_seed(cfg.seed, StreamTag::Experiment, run_index),
            });
            run_index += 1;
        }
    }
    for &size in &cfg.sweeps.ris_sizes {
        for seed_index in 0..cfg.sweeps.n_seeds {
            specs.push(RunSpec {
                axis: Axis::RisSize,
                value: size,
                seed_index,
                run_seed: derive_seed(cfg.seed, StreamTag::Experiment, run_index),
            });
            run_index += 1;
        }
    }

    let results: Result<Vec<RunResult>, CliError> =
        specs.par_iter().map(|s| evaluate_run(cfg, s)).collect();
    let results = results?;

    let mut raw_rows = String::new();
    for r in &results {
        for &(scheme, se) in &r.per_scheme {
            raw_rows.push_str(&format!(
                "{},{},{},{},{}\n",
                r.axis.name(),
                r.value,
                scheme.name(),
                r.seed_index,
                fmt_f(se),
            ));
        }
    }

    // summaries in deterministic sweep order
    let mut summary_rows = String::new();
    let mut medians = Vec::new();
    let mut summarize = |axis: Axis, value: usize| {
        for &scheme in &cfg.baselines {
            let samples: Vec<f64> = results
                .iter()
                .filter(|r| r.axis == axis && r.value == value)
                .flat_map(|r| {
                    r.per_scheme
                        .iter()
                        .filter(|(s, _)| *s == scheme)
                        .map(|&(_, se)| se)
                })
                .collect();
            if samples.is_empty() {
                continue;
            }
            let med = percentile(&samples, 0.5);
            summary_rows.push_str(&format!(
                "{},{value},{},{},{},{}\n",
                axis.name(),
                scheme.name(),
                fmt_f(med),
                fmt_f(percentile(&samples, 0.1)),
                fmt_f(percentile(&samples, 0.9)),
            ));
            medians.push((axis.name().to_string(), value, scheme, med));
        }
    };
    for &k in &cfg.sweeps.k_list {
        summarize(Axis::KUsers, k);
    }
    for &size in &cfg.sweeps.ris_sizes {
        summarize(Axis::RisSize, size);
    }

    let raw_path = write_report(
        cfg,
        "se-sweep",
        "se_sweep_raw.csv",
        &[
            "se_mean_nats: sum spectral efficiency in nats/s/Hz, averaged over the evaluation slots",
            "predictor schemes forecast the tracked oracle phases and are evaluated on the true channel",
        ],
        &format!("axis,value,scheme,seed_index,se_mean_nats\n{raw_rows}"),
    )?;
    let summary_path = write_report(
        cfg,
        "se-sweep",
        "se_sweep_summary.csv",
        &["percentiles are nearest-rank over the seed sweep"],
        &format!("axis,value,scheme,se_median,se_p10,se_p90\n{summary_rows}"),
    )?;

    Ok(SweepOutcome {
        paths: vec![raw_path, summary_path],
        medians,
    })
}

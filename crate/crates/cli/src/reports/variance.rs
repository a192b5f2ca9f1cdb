//! Prediction-dispersion comparison of the predictor schemes.
//!
//! All schemes predict the same pinned task; only the model seed varies
//! across runs. For every evaluation step the population of predictions
//! across seeds yields τ1/τ2, so the dispersion measures initialization
//! noise rather than signal variation; pooled values over the full
//! (seed × step) population are reported alongside.

use std::path::PathBuf;

use ndarray::Array2;
use rayon::prelude::*;

use ristrack_core::ensemble::{ensemble_one_step_predictions, train_ensemble, BootstrapSpec};
use ristrack_core::metrics::{deviation_norms, deviation_spread, DeviationMode};
use ristrack_core::reservoir::{
    init_lsm, one_step_predictions, train_readout, training_span, InitMode,
};
use ristrack_core::rng::{derive_seed, StreamTag};

use crate::common::{fmt_f, median, write_report};
use crate::config::{ExperimentConfig, Scheme};
use crate::scenario::task_trajectory;
use crate::CliError;

/// Seed-index offsets keep the schemes' model streams disjoint.
fn scheme_stream_offset(scheme: Scheme) -> u64 {
    match scheme {
        Scheme::RandomInitLsm => 0,
        Scheme::XavierLsm => 1_000_000,
        Scheme::Ensemble => 2_000_000,
        _ => 3_000_000,
    }
}

pub struct VarianceOutcome {
    pub paths: Vec<PathBuf>,
    /// (scheme, τ1 pooled, τ2 pooled, τ1 step-median, τ2 step-median)
    pub rows: Vec<(Scheme, f64, f64, f64, f64)>,
}

pub fn run_variance_report(cfg: &ExperimentConfig) -> Result<VarianceOutcome, CliError> {
    cfg.validated()?;
    let schemes: Vec<Scheme> = cfg
        .baselines
        .iter()
        .copied()
        .filter(|s| s.is_predictor())
        .collect();
    if schemes.len() < 2 {
        return Err(CliError::Invalid(format!(
            "variance report needs at least two predictor baselines \
             (xavier_lsm, random_init_lsm, ensemble); got {}",
            schemes.len()
        )));
    }

    let m = cfg.system.ris_m;
    let trajectory = task_trajectory(cfg, m, cfg.schedule.t_slots)?;
    let arch = cfg.reservoir_arch(m);
    let span = training_span(&arch, trajectory.n_steps(), cfg.schedule.train_fraction)?;
    let n_eval = span.n_validation;
    let n_seeds = cfg.sweeps.n_seeds;

    // predictions[scheme][seed] is an n_eval × m matrix over the held-out span
    let mut all: Vec<(Scheme, Vec<Array2<f64>>)> = Vec::new();
    for &scheme in &schemes {
        let offset = scheme_stream_offset(scheme);
        let preds: Result<Vec<Array2<f64>>, CliError> = (0..n_seeds)
            .into_par_iter()
            .map(|idx| {
                let model_seed = derive_seed(cfg.seed, StreamTag::Experiment, offset + idx as u64);
                let predictions = match scheme {
                    Scheme::XavierLsm | Scheme::RandomInitLsm => {
                        let mode = if scheme == Scheme::XavierLsm {
                            InitMode::Xavier
                        } else {
                            InitMode::UniformRandom
                        };
                        let model = init_lsm::<f64>(&arch, mode, model_seed)?;
                        let trained =
                            train_readout(model, &trajectory, cfg.schedule.train_fraction)?;
                        one_step_predictions(&trained, &trajectory)?.0
                    }
                    Scheme::Ensemble => {
                        let spec = BootstrapSpec {
                            block_len: cfg.ensemble.block_len,
                            coverage: cfg.ensemble.coverage,
                            master_seed: model_seed,
                        };
                        let ens = train_ensemble(
                            &arch,
                            &trajectory,
                            cfg.schedule.train_fraction,
                            cfg.ensemble.m1,
                            &spec,
                        )?;
                        ensemble_one_step_predictions(&ens, &trajectory)?.0
                    }
                    _ => unreachable!("filtered to predictor schemes"),
                };
                // keep the held-out span only
                Ok(predictions
                    .slice(ndarray::s![span.n_train.., ..])
                    .to_owned())
            })
            .collect();
        all.push((scheme, preds?));
    }

    // per-step dispersion across seeds, then medians over steps
    let mut per_step_rows = String::new();
    let mut summary: Vec<(Scheme, f64, f64, f64, f64)> = Vec::new();
    for (scheme, preds) in &all {
        let mut tau1_steps = Vec::with_capacity(n_eval);
        let mut tau2_steps = Vec::with_capacity(n_eval);
        for step in 0..n_eval {
            let population =
                Array2::from_shape_fn((n_seeds, m), |(seed, e)| preds[seed][[step, e]]);
            let norms = deviation_norms(&population, DeviationMode::Wrapped)?;
            let (t1, t2) = deviation_spread(&norms);
            tau1_steps.push(t1);
            tau2_steps.push(t2);
            per_step_rows.push_str(&format!(
                "{},{step},{},{},{}\n",
                scheme.name(),
                span.first_target + span.n_train + step,
                fmt_f(t1),
                fmt_f(t2),
            ));
        }
        // pooled population: every (seed, step) prediction at once
        let pooled = Array2::from_shape_fn((n_seeds * n_eval, m), |(row, e)| {
            preds[row / n_eval][[row % n_eval, e]]
        });
        let pooled_norms = deviation_norms(&pooled, DeviationMode::Wrapped)?;
        let (t1_pooled, t2_pooled) = deviation_spread(&pooled_norms);
        summary.push((
            *scheme,
            t1_pooled,
            t2_pooled,
            median(&tau1_steps),
            median(&tau2_steps),
        ));
    }

    let baseline = summary
        .iter()
        .find(|(s, ..)| *s == Scheme::RandomInitLsm)
        .copied();
    let mut summary_rows = String::new();
    for &(scheme, t1p, t2p, t1m, t2m) in &summary {
        let (red1, red2) = match baseline {
            Some((_, _, _, b1, b2)) if b1 > 0.0 && b2 > 0.0 => (
                fmt_f((b1 - t1m) / b1 * 100.0),
                fmt_f((b2 - t2m) / b2 * 100.0),
            ),
            _ => ("".into(), "".into()),
        };
        summary_rows.push_str(&format!(
            "{},{},{},{},{},{red1},{red2}\n",
            scheme.name(),
            fmt_f(t1p),
            fmt_f(t2p),
            fmt_f(t1m),
            fmt_f(t2m),
        ));
    }

    let mut notes = vec![
        "per-step τ: dispersion across model seeds at one evaluation step; summary reports the median over steps",
        "pooled τ: one population over all (seed, step) predictions",
        "reduction columns compare step-median values against random_init_lsm",
    ];
    if n_seeds == 1 {
        notes.push("WARNING: single seed; per-step dispersion is degenerate (0)");
    }

    let summary_path = write_report(
        cfg,
        "variance-report",
        "variance_summary.csv",
        &notes,
        &format!(
            "scheme,tau1_pooled,tau2_pooled,tau1_step_median,tau2_step_median,tau1_reduction_pct,tau2_reduction_pct\n{summary_rows}"
        ),
    )?;
    let per_step_path = write_report(
        cfg,
        "variance-report",
        "variance_per_step.csv",
        &["dispersion of the seed population at each held-out step"],
        &format!("scheme,eval_step,target_t,tau1,tau2\n{per_step_rows}"),
    )?;

    Ok(VarianceOutcome {
        paths: vec![summary_path, per_step_path],
        rows: summary,
    })
}

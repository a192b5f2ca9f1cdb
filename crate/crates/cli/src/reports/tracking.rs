//! Tracked-segment fit and closed-loop forecast of the strong learner.

use std::path::PathBuf;

use ristrack_core::ensemble::{
    ensemble_forecast, ensemble_one_step_predictions, train_ensemble, BootstrapSpec,
};
use ristrack_core::phase::angular_diff;
use ristrack_core::rng::{derive_seed, StreamTag};

use crate::common::{fmt_f, median, write_report};
use crate::config::ExperimentConfig;
use crate::scenario::task_trajectory;
use crate::CliError;

pub struct TrackingOutcome {
    pub paths: Vec<PathBuf>,
    pub tracked_one_step_median_rad: f64,
    pub forecast_mae_rad: f64,
    pub persistence_mae_rad: f64,
}

pub fn run_tracking_report(cfg: &ExperimentConfig) -> Result<TrackingOutcome, CliError> {
    cfg.validated()?;
    let m = cfg.system.ris_m;
    let element = cfg.report.element_index;
    let t_slots = cfg.schedule.t_slots;
    let horizon = cfg.schedule.horizon;

    // truth over the tracked span plus the forecast span
    let truth = task_trajectory(cfg, m, t_slots + horizon)?;
    let tracked = truth.prefix(t_slots);

    let spec = BootstrapSpec {
        block_len: cfg.ensemble.block_len,
        coverage: cfg.ensemble.coverage,
        master_seed: derive_seed(cfg.seed, StreamTag::Experiment, 0),
    };
    let arch = cfg.reservoir_arch(m);
    let model = train_ensemble(
        &arch,
        &tracked,
        cfg.schedule.train_fraction,
        cfg.ensemble.m1,
        &spec,
    )?;

    let (tracked_preds, first_target) = ensemble_one_step_predictions(&model, &tracked)?;
    let forecast = ensemble_forecast(&model, &tracked, horizon)?;

    let mut rows = String::new();
    let mut tracked_errors = Vec::new();
    for (i, t) in (first_target..t_slots).enumerate() {
        let errs: Vec<f64> = (0..m)
            .map(|e| angular_diff(tracked_preds[[i, e]], truth.phases()[[t, e]]).abs())
            .collect();
        tracked_errors.extend(errs.iter().copied());
        rows.push_str(&format!(
            "{t},tracked,{},{},{},{}\n",
            fmt_f(truth.phases()[[t, element]]),
            fmt_f(tracked_preds[[i, element]]),
            fmt_f(errs[element]),
            fmt_f(median(&errs)),
        ));
    }

    let last_tracked = tracked.row(t_slots - 1);
    let mut forecast_abs = Vec::new();
    let mut persistence_abs = Vec::new();
    for i in 0..horizon {
        let t = t_slots + i;
        let errs: Vec<f64> = (0..m)
            .map(|e| angular_diff(forecast.phases()[[i, e]], truth.phases()[[t, e]]).abs())
            .collect();
        forecast_abs.extend(errs.iter().copied());
        persistence_abs.extend(
            (0..m).map(|e| angular_diff(last_tracked[e], truth.phases()[[t, e]]).abs()),
        );
        rows.push_str(&format!(
            "{t},forecast,{},{},{},{}\n",
            fmt_f(truth.phases()[[t, element]]),
            fmt_f(forecast.phases()[[i, element]]),
            fmt_f(errs[element]),
            fmt_f(median(&errs)),
        ));
    }

    let tracked_median = median(&tracked_errors);
    let forecast_mae = forecast_abs.iter().sum::<f64>() / forecast_abs.len() as f64;
    let persistence_mae = persistence_abs.iter().sum::<f64>() / persistence_abs.len() as f64;

    let steps_path = write_report(
        cfg,
        "tracking-report",
        "tracking_steps.csv",
        &[
            "tracked rows are teacher-forced one-step predictions after the washout",
            "forecast rows are closed-loop autoregressive predictions",
        ],
        &format!(
            "step,segment,truth_phi_rad,predicted_phi_rad,abs_err_element_rad,median_abs_err_all_elements_rad\n{rows}"
        ),
    )?;

    let summary_body = format!(
        "metric,value\ntracked_one_step_median_abs_err_rad,{}\nforecast_mae_rad,{}\npersistence_mae_rad,{}\nforecast_beats_persistence,{}\n",
        fmt_f(tracked_median),
        fmt_f(forecast_mae),
        fmt_f(persistence_mae),
        (forecast_mae < persistence_mae) as u8,
    );
    let summary_path = write_report(
        cfg,
        "tracking-report",
        "tracking_summary.csv",
        &["persistence baseline repeats the last tracked truth value"],
        &summary_body,
    )?;

    Ok(TrackingOutcome {
        paths: vec![steps_path, summary_path],
        tracked_one_step_median_rad: tracked_median,
        forecast_mae_rad: forecast_mae,
        persistence_mae_rad: persistence_mae,
    })
}

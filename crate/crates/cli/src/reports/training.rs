//! Readout-training diagnostics.
//!
//! A closed-form ridge readout has no epochs, so the epoch axis is realized
//! as growing training-length prefixes: epoch e fits the readout on the
//! first ceil(e/E · n_train) regression rows. The batch table slices the
//! per-step losses of the fully trained model into consecutive batches.

use std::path::PathBuf;

use ndarray::Array2;

use ristrack_core::metrics::{lsm_training_flops, rmse};
use ristrack_core::phase::angular_diff;
use ristrack_core::reservoir::{
    init_lsm, one_step_predictions, train_readout_opts, training_span, FitOptions, InitMode,
    ReservoirModel,
};
use ristrack_core::rng::{derive_seed, StreamTag};

use crate::common::{fmt_f, median, write_report};
use crate::config::ExperimentConfig;
use crate::scenario::task_trajectory;
use crate::CliError;

/// Span-wise per-step loss: Euclidean norm of the wrapped error vector.
fn step_losses(
    predictions: &Array2<f64>,
    truth: &Array2<f64>,
    rows: std::ops::Range<usize>,
) -> Vec<f64> {
    rows.map(|r| {
        (0..truth.ncols())
            .map(|e| {
                let d = angular_diff(predictions[[r, e]], truth[[r, e]]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    })
    .collect()
}

fn span_rmse(
    predictions: &Array2<f64>,
    truth: &Array2<f64>,
    rows: std::ops::Range<usize>,
) -> Result<f64, CliError> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    let p = predictions.slice(ndarray::s![rows.clone(), ..]).to_owned();
    let t = truth.slice(ndarray::s![rows, ..]).to_owned();
    Ok(rmse(&p, &t)?)
}

pub fn run_training_report(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validated()?;
    let m = cfg.system.ris_m;
    let trajectory = task_trajectory(cfg, m, cfg.schedule.t_slots)?;
    let arch = cfg.reservoir_arch(m);
    let span = training_span(&arch, trajectory.n_steps(), cfg.schedule.train_fraction)?;

    // held-out rows split evenly into validation and test
    let n_val = span.n_validation.div_ceil(2);
    let n_test = span.n_validation - n_val;

    let model_seed = derive_seed(cfg.seed, StreamTag::Experiment, 0);
    let truth_targets = trajectory
        .phases()
        .slice(ndarray::s![span.first_target.., ..])
        .to_owned();

    let mut epoch_rows = String::new();
    let mut last_model: Option<ReservoirModel<f64>> = None;
    let mut last_predictions: Option<Array2<f64>> = None;
    let mut prev_prefix = 0usize;
    for epoch in 1..=cfg.report.epochs {
        let prefix = ((span.n_train as f64) * epoch as f64 / cfg.report.epochs as f64).ceil()
            as usize;
        let prefix = prefix.clamp(1, span.n_train);
        if prefix == prev_prefix && epoch != cfg.report.epochs {
            continue; // tiny training sets can repeat a prefix; keep the last epoch
        }
        prev_prefix = prefix;

        let model = init_lsm::<f64>(&arch, InitMode::Xavier, model_seed)?;
        let trained = train_readout_opts(
            model,
            &trajectory,
            cfg.schedule.train_fraction,
            FitOptions {
                subset_of_train: None,
                train_prefix: Some(prefix),
            },
        )?;
        let (predictions, first_target) = one_step_predictions(&trained, &trajectory)?;
        debug_assert_eq!(first_target, span.first_target);

        let train_rmse = span_rmse(&predictions, &truth_targets, 0..prefix)?;
        let val_rmse = span_rmse(
            &predictions,
            &truth_targets,
            span.n_train..span.n_train + n_val,
        )?;
        let test_rmse = if n_test > 0 {
            span_rmse(
                &predictions,
                &truth_targets,
                span.n_train + n_val..span.n_usable,
            )?
        } else {
            val_rmse
        };

        let stats = trained.stats().expect("trained model carries stats");
        let formula = lsm_training_flops(
            (arch.washout + prefix) as u64,
            arch.washout as u64,
            arch.input_dim as u64,
            arch.state_dim() as u64,
            arch.output_dim as u64,
        )?;
        epoch_rows.push_str(&format!(
            "{epoch},{prefix},{},{},{},{},{},{},{}\n",
            fmt_f(train_rmse),
            fmt_f(val_rmse),
            fmt_f(test_rmse),
            formula.additions,
            formula.multiplications,
            stats.actual_additions,
            stats.actual_multiplications,
        ));
        last_model = Some(trained);
        last_predictions = Some(predictions);
    }

    let epoch_body = format!(
        "epoch,train_rows,train_rmse,validation_rmse,test_rmse,formula_additions,formula_multiplications,actual_additions,actual_multiplications\n{epoch_rows}"
    );
    let epochs_path = write_report(
        cfg,
        "train-report",
        "training_epochs.csv",
        &[
            "epochs are training-length prefixes of the ridge regression rows",
            "rmse is the root of summed squared wrapped angular errors over the span",
            "flops formula uses T_max = washout + train_rows, N_res = total state width",
        ],
        &epoch_body,
    )?;

    // batch table from the final (full-prefix) model
    let predictions = last_predictions.expect("at least one epoch");
    let _ = last_model;
    let spans: [(&str, std::ops::Range<usize>); 3] = [
        ("train", 0..span.n_train),
        ("validation", span.n_train..span.n_train + n_val),
        (
            "test",
            if n_test > 0 {
                span.n_train + n_val..span.n_usable
            } else {
                span.n_train..span.n_train + n_val
            },
        ),
    ];
    let mut batch_rows = String::new();
    for &batch_size in &cfg.report.batch_sizes {
        for (phase, range) in &spans {
            let losses = step_losses(&predictions, &truth_targets, range.clone());
            if losses.is_empty() {
                continue;
            }
            let batches: Vec<f64> = losses
                .chunks(batch_size)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let min = batches.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = batches.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            batch_rows.push_str(&format!(
                "{batch_size},{phase},{},{},{},{}\n",
                batches.len(),
                fmt_f(min),
                fmt_f(median(&batches)),
                fmt_f(max),
            ));
        }
    }
    let batch_body = format!(
        "batch_size,phase,n_batches,loss_min,loss_median,loss_max\n{batch_rows}"
    );
    let batch_path = write_report(
        cfg,
        "train-report",
        "training_batches.csv",
        &["loss is the per-step wrapped error norm, averaged within each batch"],
        &batch_body,
    )?;

    Ok(vec![epochs_path, batch_path])
}

//! Bootstrap-aggregated reservoir ensemble.
//!
//! Weak learners are independent reservoirs trained on block-bootstrapped
//! subsets of the training rows; the strong learner averages their encoded
//! predictions with weights proportional to inverse validation RMSE and
//! feeds the aggregate back to every learner during autoregression.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataio::PhaseTrajectory;
use crate::phase::wrap_to_2pi;
use crate::reservoir::{
    init_lsm, renormalize_pair, run_states, train_readout_opts, update_state, EncodedSequence,
    FitOptions, InitMode, ReservoirArch, ReservoirError, ReservoirModel,
};
use crate::rng::{self, derive_seed, stream_rng, StreamTag};
use crate::scalar::Scalar;

const WEIGHT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble specification: {context}")]
    InvalidSpec { context: String },
    #[error("learner {index} failed: {source}")]
    LearnerFailed {
        index: usize,
        source: ReservoirError,
    },
    #[error("learner outputs disagree in length")]
    LengthMismatch,
    #[error("reservoir error: {0}")]
    Reservoir(#[from] ReservoirError),
}

/// Block-bootstrap parameters plus the master seed every derived stream
/// hangs off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSpec {
    pub block_len: usize,
    pub coverage: f64,
    pub master_seed: u64,
}

impl BootstrapSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            block_len: 10,
            coverage: 0.8,
            master_seed,
        }
    }
}

/// Trained weak learners plus their normalized aggregation weights.
#[derive(Debug, Clone)]
pub struct EnsembleModel<T> {
    learners: Vec<ReservoirModel<T>>,
    weights: Array1<T>,
    bootstrap: BootstrapSpec,
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn from_parts(
        learners: Vec<ReservoirModel<T>>,
        weights: Array1<T>,
        bootstrap: BootstrapSpec,
    ) -> Result<Self, EnsembleError> {
        if learners.is_empty() {
            return Err(EnsembleError::InvalidSpec {
                context: "ensemble needs at least one learner".into(),
            });
        }
        if learners.len() != weights.len() {
            return Err(EnsembleError::InvalidSpec {
                context: format!(
                    "{} learners vs {} weights",
                    learners.len(),
                    weights.len()
                ),
            });
        }
        if weights.iter().any(|w| *w < T::zero()) {
            return Err(EnsembleError::InvalidSpec {
                context: "weights must be nonnegative".into(),
            });
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::from_f64_lossy(1e-12) {
            return Err(EnsembleError::InvalidSpec {
                context: format!("weights sum to {total}, expected 1"),
            });
        }
        if learners.iter().any(|l| !l.trained()) {
            return Err(EnsembleError::InvalidSpec {
                context: "every learner must carry a trained readout".into(),
            });
        }
        Ok(Self {
            learners,
            weights,
            bootstrap,
        })
    }

    pub fn m1(&self) -> usize {
        self.learners.len()
    }

    pub fn learners(&self) -> &[ReservoirModel<T>] {
        &self.learners
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn bootstrap(&self) -> &BootstrapSpec {
        &self.bootstrap
    }
}

/// Per-learner index subsets of `0..t_len`, each a union of contiguous
/// blocks drawn with replacement (duplicates kept, sorted ascending) until
/// `coverage·t_len` indices counting multiplicity are collected.
pub fn bootstrap_indices(
    t_len: usize,
    m1: usize,
    block_len: usize,
    coverage: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EnsembleError> {
    if block_len < 2 {
        return Err(EnsembleError::InvalidSpec {
            context: format!("block_len {block_len} must be at least 2"),
        });
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(EnsembleError::InvalidSpec {
            context: format!("coverage {coverage} must lie in (0, 1]"),
        });
    }
    if t_len < block_len {
        return Err(EnsembleError::InvalidSpec {
            context: format!("t_len {t_len} shorter than block_len {block_len}"),
        });
    }
    if m1 == 0 {
        return Err(EnsembleError::InvalidSpec {
            context: "need at least one learner".into(),
        });
    }
    let target = ((coverage * t_len as f64).round() as usize).max(1);
    let mut subsets = Vec::with_capacity(m1);
    for learner in 0..m1 {
        let mut rng = stream_rng(seed, StreamTag::Bootstrap, learner as u64);
        let mut indices = Vec::with_capacity(target + block_len);
        while indices.len() < target {
            let start = rng::uniform::<f64>(&mut rng, 0.0, (t_len - block_len + 1) as f64)
                .floor() as usize;
            let start = start.min(t_len - block_len);
            for i in start..start + block_len {
                indices.push(i);
            }
        }
        indices.truncate(target);
        indices.sort_unstable();
        subsets.push(indices);
    }
    Ok(subsets)
}

/// Trains `m1` weak learners in parallel on bootstrapped subsets and weights
/// them by inverse validation RMSE (normalized to sum 1). Every learner uses
/// a seed derived from `(spec.master_seed, index)`, so the result does not
/// depend on scheduling.
pub fn train_ensemble<T: Scalar>(
    arch: &ReservoirArch,
    trajectory: &PhaseTrajectory<T>,
    train_fraction: f64,
    m1: usize,
    spec: &BootstrapSpec,
) -> Result<EnsembleModel<T>, EnsembleError> {
    let span = crate::reservoir::training_span(arch, trajectory.n_steps(), train_fraction)?;
    let subsets = bootstrap_indices(span.n_train, m1, spec.block_len, spec.coverage, spec.master_seed)?;

    let learners: Result<Vec<ReservoirModel<T>>, EnsembleError> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(spec.master_seed, StreamTag::Learner, i as u64);
            let model = init_lsm::<T>(arch, InitMode::Xavier, seed)
                .map_err(|source| EnsembleError::LearnerFailed { index: i, source })?;
            train_readout_opts(
                model,
                trajectory,
                train_fraction,
                FitOptions {
                    subset_of_train: Some(&subsets[i]),
                    train_prefix: None,
                },
            )
            .map_err(|source| EnsembleError::LearnerFailed { index: i, source })
        })
        .collect();
    let learners = learners?;

    let raw: Vec<f64> = learners
        .iter()
        .map(|l| 1.0 / (WEIGHT_EPSILON + l.stats().expect("trained").validation_rmse))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = Array1::from_iter(raw.iter().map(|w| T::from_f64_lossy(w / total)));

    EnsembleModel::from_parts(learners, weights, *spec)
}

/// Result of one aggregation step: the weighted circular mean in encoded
/// space plus the indices of elements that hit an antipodal tie and fell
/// back to the highest-weight learner's value.
#[derive(Debug, Clone)]
pub struct Aggregated<T> {
    pub encoded: Array1<T>,
    pub fallback_elements: Vec<usize>,
}

impl<T: Scalar> Aggregated<T> {
    pub fn decode(&self) -> Array1<T> {
        crate::reservoir::decode_phases(self.encoded.as_slice().expect("contiguous"))
    }
}

/// Weighted arithmetic mean in encoded space with per-pair renormalization:
/// circular-mean semantics for the underlying phases.
pub fn aggregate<T: Scalar>(
    outputs: &[Array1<T>],
    weights: &Array1<T>,
) -> Result<Aggregated<T>, EnsembleError> {
    if outputs.is_empty() || outputs.len() != weights.len() {
        return Err(EnsembleError::LengthMismatch);
    }
    let width = outputs[0].len();
    if outputs.iter().any(|o| o.len() != width) || width % 2 != 0 {
        return Err(EnsembleError::LengthMismatch);
    }
    let m = width / 2;

    let mut mean = Array1::<T>::zeros(width);
    for (out, &w) in outputs.iter().zip(weights.iter()) {
        for (acc, &v) in mean.iter_mut().zip(out.iter()) {
            *acc += v * w;
        }
    }

    // index of the heaviest learner (lowest index wins ties)
    let lead = (0..weights.len())
        .max_by(|&a, &b| {
            weights[a]
                .partial_cmp(&weights[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.cmp(&a))
        })
        .expect("nonempty");

    let tiny = T::from_f64_lossy(1e-12);
    let mut fallback_elements = Vec::new();
    let mut encoded = Array1::zeros(width);
    for e in 0..m {
        let (c, s) = (mean[e], mean[m + e]);
        if (c * c + s * s).sqrt() <= tiny {
            fallback_elements.push(e);
            let (fc, fs) = renormalize_pair(outputs[lead][e], outputs[lead][m + e]);
            encoded[e] = fc;
            encoded[m + e] = fs;
        } else {
            let (nc, ns) = renormalize_pair(c, s);
            encoded[e] = nc;
            encoded[m + e] = ns;
        }
    }
    Ok(Aggregated {
        encoded,
        fallback_elements,
    })
}

fn learner_encoded_outputs<T: Scalar>(
    model: &EnsembleModel<T>,
    states: &[Vec<Array1<T>>],
) -> Result<Vec<Array1<T>>, EnsembleError> {
    model
        .learners
        .iter()
        .zip(states)
        .map(|(learner, st)| {
            let concat: Vec<T> = st.iter().flat_map(|s| s.iter().copied()).collect();
            learner
                .readout_from_state(&concat)
                .map_err(EnsembleError::from)
        })
        .collect()
}

/// Teacher-forced aggregated one-step predictions over a trajectory: every
/// learner runs on the true history and the readouts are aggregated per
/// step. Row `i` predicts target `first_target + i`.
pub fn ensemble_one_step_predictions<T: Scalar>(
    model: &EnsembleModel<T>,
    trajectory: &PhaseTrajectory<T>,
) -> Result<(Array2<T>, usize), EnsembleError> {
    let encoded = EncodedSequence::from_trajectory(trajectory);
    let per_learner_states: Result<Vec<_>, ReservoirError> = model
        .learners
        .iter()
        .map(|l| run_states(l, &encoded))
        .collect();
    let per_learner_states = per_learner_states?;
    let washout = model.learners[0].arch().washout;
    let first_target = washout + 1;
    let t_len = trajectory.n_steps();
    if t_len <= first_target {
        return Err(EnsembleError::Reservoir(ReservoirError::InsufficientData {
            needed: first_target + 1,
            got: t_len,
        }));
    }
    let m = model.learners[0].arch().n_elements();
    let mut predictions = Array2::zeros((t_len - first_target, m));
    for t in first_target..t_len {
        let outputs: Result<Vec<Array1<T>>, EnsembleError> = model
            .learners
            .iter()
            .zip(&per_learner_states)
            .map(|(learner, states)| {
                let row = states.row(t - 1);
                learner
                    .readout_from_state(row.as_slice().expect("contiguous row"))
                    .map_err(EnsembleError::from)
            })
            .collect();
        let agg = aggregate(&outputs?, &model.weights)?;
        predictions.row_mut(t - first_target).assign(&agg.decode());
    }
    Ok((predictions, first_target))
}

/// Aggregated one-step prediction from a shared history.
pub fn ensemble_predict_next<T: Scalar>(
    model: &EnsembleModel<T>,
    history: &PhaseTrajectory<T>,
) -> Result<Array1<T>, EnsembleError> {
    let encoded = EncodedSequence::from_trajectory(history);
    let states: Result<Vec<_>, ReservoirError> = model
        .learners
        .iter()
        .map(|l| {
            let s = run_states(l, &encoded)?;
            let last = s.row(s.nrows() - 1).to_owned();
            Ok(vec![last]) // flattened below
        })
        .collect();
    // run_states already concatenates layers, so wrap each as a single block
    let states = states?;
    let outputs: Result<Vec<Array1<T>>, EnsembleError> = model
        .learners
        .iter()
        .zip(&states)
        .map(|(learner, st)| {
            learner
                .readout_from_state(st[0].as_slice().expect("contiguous"))
                .map_err(EnsembleError::from)
        })
        .collect();
    Ok(aggregate(&outputs?, &model.weights)?.decode())
}

/// Autoregressive strong-learner forecast with shared feedback: at every
/// step all learners consume the same aggregated prediction.
pub fn ensemble_forecast<T: Scalar>(
    model: &EnsembleModel<T>,
    history: &PhaseTrajectory<T>,
    horizon: usize,
) -> Result<PhaseTrajectory<T>, EnsembleError> {
    ensemble_forecast_impl(model, history, horizon, true)
}

/// Ablation variant: every learner rolls out on its own feedback and only
/// the emitted trajectory is aggregated.
pub fn ensemble_forecast_independent<T: Scalar>(
    model: &EnsembleModel<T>,
    history: &PhaseTrajectory<T>,
    horizon: usize,
) -> Result<PhaseTrajectory<T>, EnsembleError> {
    ensemble_forecast_impl(model, history, horizon, false)
}

fn ensemble_forecast_impl<T: Scalar>(
    model: &EnsembleModel<T>,
    history: &PhaseTrajectory<T>,
    horizon: usize,
    shared_feedback: bool,
) -> Result<PhaseTrajectory<T>, EnsembleError> {
    if horizon == 0 {
        return Err(EnsembleError::InvalidSpec {
            context: "forecast horizon must be at least 1".into(),
        });
    }
    let encoded = EncodedSequence::from_trajectory(history);
    let mut per_learner_states: Vec<Vec<Array1<T>>> = Vec::with_capacity(model.m1());
    for learner in &model.learners {
        if encoded.n_samples() <= learner.arch().washout {
            return Err(EnsembleError::Reservoir(ReservoirError::InsufficientData {
                needed: learner.arch().washout + 1,
                got: encoded.n_samples(),
            }));
        }
        let mut states = learner.zero_states();
        for t in 0..encoded.n_samples() {
            let input = encoded.samples().row(t).to_owned();
            states = update_state(learner, &states, &input)?;
        }
        per_learner_states.push(states);
    }

    let width = model.learners[0].arch().output_dim;
    let m = width / 2;
    let mut phases = Array2::zeros((horizon, m));
    let mut per_learner_feedback: Vec<Array1<T>> = vec![Array1::zeros(width); model.m1()];
    for step in 0..horizon {
        let outputs = learner_encoded_outputs(model, &per_learner_states)?;
        let agg = aggregate(&outputs, &model.weights)?;
        for e in 0..m {
            let (c, s) = (agg.encoded[e], agg.encoded[m + e]);
            phases[[step, e]] = wrap_to_2pi(s.atan2(c));
        }
        if step + 1 < horizon {
            for (i, states) in per_learner_states.iter_mut().enumerate() {
                let input = if shared_feedback {
                    agg.encoded.clone()
                } else {
                    let raw = &outputs[i];
                    let mut own = per_learner_feedback[i].clone();
                    for e in 0..m {
                        let (c, s) = renormalize_pair(raw[e], raw[m + e]);
                        own[e] = c;
                        own[m + e] = s;
                    }
                    per_learner_feedback[i] = own.clone();
                    own
                };
                *states = update_state(&model.learners[i], states, &input)?;
            }
        }
    }
    PhaseTrajectory::new(phases, history.slot_interval_s(), history.origin()).map_err(|e| {
        EnsembleError::InvalidSpec {
            context: format!("forecast produced an invalid trajectory: {e}"),
        }
    })
}

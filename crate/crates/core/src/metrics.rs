//! Prediction-quality metrics and closed-form training-cost formulas.
//!
//! All angle differences are wrapped to `(−π, π]` before entering a norm;
//! the unwrapped variants exist for literal comparison with plain Euclidean
//! treatments of the phase matrix.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::phase::{circular_mean, wrap_to_pi};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: predicted {predicted:?} vs truth {truth:?}")]
    ShapeMismatch {
        predicted: (usize, usize),
        truth: (usize, usize),
    },
    #[error("empty prediction set")]
    EmptyPopulation,
    #[error("T_max ({t_max}) must be >= T_0 ({t_0})")]
    InvalidWindow { t_max: u64, t_0: u64 },
    #[error("empty FLOPs list")]
    EmptyFlopsList,
}

/// Whether differences live on the circle or on the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeviationMode {
    #[default]
    Wrapped,
    Unwrapped,
}

fn diff<T: Scalar>(a: T, b: T, mode: DeviationMode) -> T {
    match mode {
        DeviationMode::Wrapped => wrap_to_pi(a - b),
        DeviationMode::Unwrapped => a - b,
    }
}

/// Root of the summed squared angular errors over all entries:
/// `sqrt(Σ_t Σ_m wrap(Θ̂[t,m] − Θ[t,m])²)`. Zero iff the matrices agree
/// modulo 2π.
pub fn rmse<T: Scalar>(predicted: &Array2<T>, truth: &Array2<T>) -> Result<T, MetricsError> {
    rmse_with_mode(predicted, truth, DeviationMode::Wrapped)
}

pub fn rmse_with_mode<T: Scalar>(
    predicted: &Array2<T>,
    truth: &Array2<T>,
    mode: DeviationMode,
) -> Result<T, MetricsError> {
    if predicted.dim() != truth.dim() {
        return Err(MetricsError::ShapeMismatch {
            predicted: predicted.dim(),
            truth: truth.dim(),
        });
    }
    let sum = predicted
        .iter()
        .zip(truth.iter())
        .map(|(&p, &t)| {
            let d = diff(p, t, mode);
            d * d
        })
        .sum::<T>();
    Ok(sum.sqrt())
}

/// Per-element mean of a prediction population: circular in wrapped mode,
/// arithmetic otherwise. An antipodal tie (vanishing resultant) pins the
/// circular mean at zero.
fn population_mean<T: Scalar>(predictions: &Array2<T>, mode: DeviationMode) -> Array1<T> {
    let (q, m) = predictions.dim();
    Array1::from_iter((0..m).map(|e| {
        let column: Vec<T> = (0..q).map(|i| predictions[[i, e]]).collect();
        match mode {
            DeviationMode::Wrapped => circular_mean(&column).unwrap_or_else(T::zero),
            DeviationMode::Unwrapped => column.iter().copied().sum::<T>() / T::from_usize(q).unwrap(),
        }
    }))
}

/// Euclidean norms of the per-prediction deviation vectors around the
/// population mean.
pub fn deviation_norms<T: Scalar>(
    predictions: &Array2<T>,
    mode: DeviationMode,
) -> Result<Vec<T>, MetricsError> {
    let (q, m) = predictions.dim();
    if q == 0 || m == 0 {
        return Err(MetricsError::EmptyPopulation);
    }
    let mean = population_mean(predictions, mode);
    Ok((0..q)
        .map(|i| {
            (0..m)
                .map(|e| {
                    let d = diff(predictions[[i, e]], mean[e], mode);
                    d * d
                })
                .sum::<T>()
                .sqrt()
        })
        .collect())
}

/// Aggregates deviation norms into `(τ1, τ2)`: the mean norm and the
/// root-mean-square norm.
pub fn deviation_spread<T: Scalar>(norms: &[T]) -> (T, T) {
    let q = T::from_usize(norms.len().max(1)).unwrap();
    let tau1 = norms.iter().copied().sum::<T>() / q;
    let tau2 = (norms.iter().map(|&n| n * n).sum::<T>() / q).sqrt();
    (tau1, tau2)
}

/// τ1: mean Euclidean norm of wrapped deviations around the circular mean.
/// Rows of `predictions` are the Q predicted phase vectors.
pub fn mean_abs_deviation<T: Scalar>(predictions: &Array2<T>) -> Result<T, MetricsError> {
    mean_abs_deviation_with_mode(predictions, DeviationMode::Wrapped)
}

pub fn mean_abs_deviation_with_mode<T: Scalar>(
    predictions: &Array2<T>,
    mode: DeviationMode,
) -> Result<T, MetricsError> {
    let norms = deviation_norms(predictions, mode)?;
    Ok(deviation_spread(&norms).0)
}

/// τ2: root-mean-square deviation norm around the population mean.
pub fn std_deviation<T: Scalar>(predictions: &Array2<T>) -> Result<T, MetricsError> {
    std_deviation_with_mode(predictions, DeviationMode::Wrapped)
}

pub fn std_deviation_with_mode<T: Scalar>(
    predictions: &Array2<T>,
    mode: DeviationMode,
) -> Result<T, MetricsError> {
    let norms = deviation_norms(predictions, mode)?;
    Ok(deviation_spread(&norms).1)
}

/// Training-cost parameters the closed-form FLOP expressions depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsParams {
    pub t_max: u64,
    pub t_0: u64,
    pub n_in: u64,
    pub n_res: u64,
    pub n_out: u64,
}

/// Addition and multiplication counts for one readout training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsBreakdown {
    pub additions: u128,
    pub multiplications: u128,
    pub params: FlopsParams,
}

/// Closed-form training cost of the readout:
///
/// additions  `(Δ+1)²(N_res+N_in+Δ) + (N_res+N_in)(Δ+1)Δ + N_out(N_res+N_in)Δ`
/// multiplications  `(Δ+1)²(N_res+2+Δ)(N_res+N_in)(Δ+1)² + N_out(N_res+N_in)(Δ+1)²`
///
/// with `Δ = T_max − T_0`. The addition count grows like `(Δ+1)³`.
pub fn lsm_training_flops(
    t_max: u64,
    t_0: u64,
    n_in: u64,
    n_res: u64,
    n_out: u64,
) -> Result<FlopsBreakdown, MetricsError> {
    if t_max < t_0 {
        return Err(MetricsError::InvalidWindow { t_max, t_0 });
    }
    let params = FlopsParams {
        t_max,
        t_0,
        n_in,
        n_res,
        n_out,
    };
    let dt = (t_max - t_0) as u128;
    let dt1 = dt + 1;
    let nri = (n_res + n_in) as u128;
    let nr = n_res as u128;
    let no = n_out as u128;

    let additions = dt1 * dt1 * (nri + dt) + nri * dt1 * dt + no * nri * dt;
    let multiplications = dt1 * dt1 * (nr + 2 + dt) * nri * dt1 * dt1 + no * nri * dt1 * dt1;

    Ok(FlopsBreakdown {
        additions,
        multiplications,
        params,
    })
}

/// Ensemble training cost under fully parallel learners: the elementwise
/// maximum over the per-learner breakdowns.
pub fn ensemble_training_flops(
    learners: &[FlopsBreakdown],
) -> Result<FlopsBreakdown, MetricsError> {
    let first = learners.first().ok_or(MetricsError::EmptyFlopsList)?;
    let mut out = *first;
    for l in &learners[1..] {
        out.additions = out.additions.max(l.additions);
        out.multiplications = out.multiplications.max(l.multiplications);
    }
    Ok(out)
}

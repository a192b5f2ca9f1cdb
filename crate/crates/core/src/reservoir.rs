//! Multi-layer liquid state machine with a closed-form ridge readout.
//!
//! Layers are cascaded in series: layer 1 consumes the encoded input sample,
//! every deeper layer consumes the fresh state of the layer above, and the
//! readout sees the concatenation of all layer states plus a constant bias
//! feature. The internal weights are drawn once from the seed and never
//! change; training solves only the readout by ridge regression.
//!
//! Phases enter the network as `(cos, sin)` pairs so the 2π wrap never
//! appears as a discontinuity; predictions are decoded back through the
//! two-argument arctangent after per-pair renormalization.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::dataio::PhaseTrajectory;
use crate::linalg::{cholesky_solve, spectral_radius, LinalgError};
use crate::phase::wrap_to_2pi;
use crate::rng::{self, stream_rng, StreamTag};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ReservoirError {
    #[error("invalid architecture: {context}")]
    InvalidArch { context: String },
    #[error("fan-in must be at least 1")]
    ZeroFanIn,
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("model has no trained readout")]
    NotTrained,
    #[error("normal equations are singular; a positive ridge_lambda is required")]
    RegularizationRequired,
    #[error("reservoir matrix has zero spectral radius; cannot rescale")]
    ZeroSpectralRadius,
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Softsign,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softsign => x / (T::one() + x.abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Xavier,
    UniformRandom,
}

/// Hyperparameters of the layered reservoir.
#[derive(Debug, Clone)]
pub struct ReservoirArch {
    pub n_layers: usize,
    pub neurons_per_layer: usize,
    /// Encoded input width, 2M for M surface elements.
    pub input_dim: usize,
    /// Encoded output width, 2M.
    pub output_dim: usize,
    /// Expected fraction of nonzero internal weights, in (0, 1].
    pub connectivity: f64,
    pub spectral_radius: f64,
    /// When false the internal weights keep their raw scale (no rescaling).
    pub rescale_spectral_radius: bool,
    pub activation: Activation,
    pub washout: usize,
    pub ridge_lambda: f64,
}

impl ReservoirArch {
    /// Defaults for a surface with `m` elements: 5 layers of 100 neurons,
    /// 10% connectivity, spectral radius 0.9, tanh, washout 10, λ = 1e-6.
    pub fn for_elements(m: usize) -> Self {
        Self {
            n_layers: 5,
            neurons_per_layer: 100,
            input_dim: 2 * m,
            output_dim: 2 * m,
            connectivity: 0.1,
            spectral_radius: 0.9,
            rescale_spectral_radius: true,
            activation: Activation::Tanh,
            washout: 10,
            ridge_lambda: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<(), ReservoirError> {
        let fail = |context: &str| {
            Err(ReservoirError::InvalidArch {
                context: context.into(),
            })
        };
        if self.n_layers == 0 {
            return fail("need at least one layer");
        }
        if self.neurons_per_layer == 0 {
            return fail("need at least one neuron per layer");
        }
        if self.input_dim == 0 || self.input_dim % 2 != 0 {
            return fail("input_dim must be a positive even number (cos/sin pairs)");
        }
        if self.output_dim == 0 || self.output_dim % 2 != 0 {
            return fail("output_dim must be a positive even number (cos/sin pairs)");
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return fail("connectivity must lie in (0, 1]");
        }
        if self.spectral_radius <= 0.0 {
            return fail("spectral radius must be positive");
        }
        if self.ridge_lambda < 0.0 {
            return fail("ridge_lambda must be nonnegative");
        }
        Ok(())
    }

    /// Total reservoir state width across layers (bias excluded).
    pub fn state_dim(&self) -> usize {
        self.n_layers * self.neurons_per_layer
    }

    /// Readout feature width: concatenated states plus the bias term.
    pub fn feature_dim(&self) -> usize {
        self.state_dim() + 1
    }

    pub fn n_elements(&self) -> usize {
        self.output_dim / 2
    }
}

/// Coordinate-list sparse matrix for the internal reservoir weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(u32, u32, T)>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn from_entries(nrows: usize, ncols: usize, entries: Vec<(u32, u32, T)>) -> Self {
        Self {
            nrows,
            ncols,
            entries,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, u32, T)] {
        &self.entries
    }

    pub fn matvec_into(&self, x: &Array1<T>, out: &mut Array1<T>) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for &(i, j, v) in &self.entries {
            out[i as usize] += v * x[j as usize];
        }
    }

    pub fn scale(&mut self, factor: T) {
        for e in &mut self.entries {
            e.2 = e.2 * factor;
        }
    }

    pub fn to_dense_f64(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.nrows, self.ncols));
        for &(i, j, v) in &self.entries {
            dense[[i as usize, j as usize]] = v.to_f64_lossy();
        }
        dense
    }
}

/// Readout-training diagnostics, recorded on the trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingStats {
    pub n_train: usize,
    pub n_validation: usize,
    /// Angular RMSE (root of summed squared wrapped errors) on the rows the
    /// readout was fitted on.
    pub train_rmse: f64,
    /// Angular RMSE on the held-out span, teacher-forced one-step.
    pub validation_rmse: f64,
    /// Instrumented FLOP count of the training path as implemented.
    pub actual_additions: u128,
    pub actual_multiplications: u128,
}

/// Layered reservoir with fixed random weights and an optional trained
/// readout. Immutable once trained; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ReservoirModel<T> {
    arch: ReservoirArch,
    init_mode: InitMode,
    seed: u64,
    w_in: Vec<Array2<T>>,
    w_res: Vec<SparseMatrix<T>>,
    w_out: Option<Array2<T>>,
    stats: Option<TrainingStats>,
}

impl<T: Scalar> ReservoirModel<T> {
    /// Assembles a model from explicit weights (used by tests and the
    /// container loader). Shapes are checked against the architecture.
    pub fn from_parts(
        arch: ReservoirArch,
        init_mode: InitMode,
        seed: u64,
        w_in: Vec<Array2<T>>,
        w_res: Vec<SparseMatrix<T>>,
        w_out: Option<Array2<T>>,
        stats: Option<TrainingStats>,
    ) -> Result<Self, ReservoirError> {
        arch.validate()?;
        if w_in.len() != arch.n_layers || w_res.len() != arch.n_layers {
            return Err(ReservoirError::DimensionMismatch {
                context: "per-layer weight count differs from n_layers".into(),
            });
        }
        for (l, (wi, wr)) in w_in.iter().zip(&w_res).enumerate() {
            let in_width = if l == 0 {
                arch.input_dim
            } else {
                arch.neurons_per_layer
            };
            if wi.nrows() != arch.neurons_per_layer || wi.ncols() != in_width {
                return Err(ReservoirError::DimensionMismatch {
                    context: format!("layer {l} input weights have shape {:?}", wi.dim()),
                });
            }
            if wr.nrows() != arch.neurons_per_layer || wr.ncols() != arch.neurons_per_layer {
                return Err(ReservoirError::DimensionMismatch {
                    context: format!("layer {l} reservoir weights are not square"),
                });
            }
        }
        if let Some(w) = &w_out {
            if w.nrows() != arch.output_dim || w.ncols() != arch.feature_dim() {
                return Err(ReservoirError::DimensionMismatch {
                    context: format!("readout has shape {:?}", w.dim()),
                });
            }
        }
        Ok(Self {
            arch,
            init_mode,
            seed,
            w_in,
            w_res,
            w_out,
            stats,
        })
    }

    pub fn arch(&self) -> &ReservoirArch {
        &self.arch
    }

    pub fn init_mode(&self) -> InitMode {
        self.init_mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trained(&self) -> bool {
        self.w_out.is_some()
    }

    pub fn w_in(&self, layer: usize) -> &Array2<T> {
        &self.w_in[layer]
    }

    pub fn w_res(&self, layer: usize) -> &SparseMatrix<T> {
        &self.w_res[layer]
    }

    pub fn w_out(&self) -> Option<&Array2<T>> {
        self.w_out.as_ref()
    }

    pub fn stats(&self) -> Option<&TrainingStats> {
        self.stats.as_ref()
    }

    /// Spectral radius of one layer's internal weights, measured in f64.
    pub fn measured_spectral_radius(&self, layer: usize) -> f64 {
        spectral_radius(&self.w_res[layer].to_dense_f64())
    }

    pub fn zero_states(&self) -> Vec<Array1<T>> {
        (0..self.arch.n_layers)
            .map(|_| Array1::zeros(self.arch.neurons_per_layer))
            .collect()
    }

    /// Applies the trained readout to a concatenated state vector (the bias
    /// feature is appended internally). Raw encoded output, not yet
    /// renormalized.
    pub fn readout_from_state(&self, concat_state: &[T]) -> Result<Array1<T>, ReservoirError> {
        let w_out = self.w_out.as_ref().ok_or(ReservoirError::NotTrained)?;
        let f = self.arch.feature_dim();
        if concat_state.len() != f - 1 {
            return Err(ReservoirError::DimensionMismatch {
                context: format!(
                    "state width {} != {} expected by the readout",
                    concat_state.len(),
                    f - 1
                ),
            });
        }
        let mut out = Array1::zeros(self.arch.output_dim);
        for (o, row) in out.iter_mut().zip(w_out.rows()) {
            let mut acc = row[f - 1]; // bias feature = 1
            for (w, s) in row.iter().zip(concat_state.iter()) {
                acc += *w * *s;
            }
            *o = acc;
        }
        Ok(out)
    }
}

/// How a trajectory of `t_len` steps splits into washout, training rows and
/// validation rows for a given architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingSpan {
    /// First regression target index `t` (its feature is state row `t − 1`).
    pub first_target: usize,
    /// Usable (state, target) pairs after the washout.
    pub n_usable: usize,
    /// Pairs assigned to the regression, time-ordered prefix.
    pub n_train: usize,
    /// Held-out pairs following the training span.
    pub n_validation: usize,
}

/// Computes the train/validation split used by [`train_readout`]; bootstrap
/// subsets index into `0..n_train` of this span.
pub fn training_span(
    arch: &ReservoirArch,
    t_len: usize,
    train_fraction: f64,
) -> Result<TrainingSpan, ReservoirError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ReservoirError::InvalidArch {
            context: format!("train_fraction {train_fraction} must lie in (0, 1)"),
        });
    }
    if t_len < arch.washout + 4 {
        return Err(ReservoirError::InsufficientData {
            needed: arch.washout + 4,
            got: t_len,
        });
    }
    let first_target = arch.washout + 1;
    let n_usable = t_len - first_target;
    let n_train = (((n_usable as f64) * train_fraction).floor() as usize).clamp(1, n_usable - 1);
    Ok(TrainingSpan {
        first_target,
        n_usable,
        n_train,
        n_validation: n_usable - n_train,
    })
}

/// Gaussian input weights with variance exactly `1/fan_in` (zero mean),
/// the layer-width-preserving initialization.
pub fn xavier_input_weights<T: Scalar>(
    fan_in: usize,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<Array2<T>, ReservoirError> {
    if fan_in == 0 {
        return Err(ReservoirError::ZeroFanIn);
    }
    let std = (1.0 / fan_in as f64).sqrt();
    let mut rng = stream_rng(seed, StreamTag::ReservoirInput, 0);
    Ok(Array2::from_shape_fn((rows, cols), |_| {
        T::from_f64_lossy(rng::normal::<f64>(&mut rng) * std)
    }))
}

fn uniform_weights<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Array2<T> {
    let mut rng = stream_rng(seed, StreamTag::ReservoirInput, 0);
    Array2::from_shape_fn((rows, cols), |_| rng::uniform::<T>(&mut rng, -1.0, 1.0))
}

fn sparse_internal_weights<T: Scalar>(
    n: usize,
    connectivity: f64,
    seed: u64,
) -> SparseMatrix<T> {
    let mut rng = stream_rng(seed, StreamTag::ReservoirInternal, 0);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let occupied: f64 = rng::uniform(&mut rng, 0.0, 1.0);
            if occupied < connectivity {
                entries.push((i as u32, j as u32, rng::uniform::<T>(&mut rng, -1.0, 1.0)));
            }
        }
    }
    SparseMatrix::from_entries(n, n, entries)
}

/// Builds the fixed random weights of a layered reservoir.
///
/// Internal weights are sparse uniform(−1, 1) rescaled to the architecture's
/// spectral radius; input weights follow `init_mode` with the fan-in of the
/// layer they feed (the encoded width for layer 1, the layer width after).
pub fn init_lsm<T: Scalar>(
    arch: &ReservoirArch,
    init_mode: InitMode,
    seed: u64,
) -> Result<ReservoirModel<T>, ReservoirError> {
    arch.validate()?;
    let n = arch.neurons_per_layer;
    let mut w_in = Vec::with_capacity(arch.n_layers);
    let mut w_res = Vec::with_capacity(arch.n_layers);
    for layer in 0..arch.n_layers {
        let in_width = if layer == 0 { arch.input_dim } else { n };
        let in_seed = crate::rng::derive_seed(seed, StreamTag::ReservoirInput, layer as u64);
        let weights = match init_mode {
            InitMode::Xavier => xavier_input_weights::<T>(in_width, n, in_width, in_seed)?,
            InitMode::UniformRandom => uniform_weights::<T>(n, in_width, in_seed),
        };
        w_in.push(weights);

        let res_seed = crate::rng::derive_seed(seed, StreamTag::ReservoirInternal, layer as u64);
        let mut sparse = sparse_internal_weights::<T>(n, arch.connectivity, res_seed);
        if arch.rescale_spectral_radius {
            let rho = spectral_radius(&sparse.to_dense_f64());
            if rho <= f64::MIN_POSITIVE {
                return Err(ReservoirError::ZeroSpectralRadius);
            }
            sparse.scale(T::from_f64_lossy(arch.spectral_radius / rho));
        }
        w_res.push(sparse);
    }
    ReservoirModel::from_parts(arch.clone(), init_mode, seed, w_in, w_res, None, None)
}

/// One reservoir step: layer 1 consumes `input`, each deeper layer consumes
/// the fresh state of the previous one;
/// `new = f_act(W_res·old + W_in·layer_input)`.
pub fn update_state<T: Scalar>(
    model: &ReservoirModel<T>,
    states: &[Array1<T>],
    input: &Array1<T>,
) -> Result<Vec<Array1<T>>, ReservoirError> {
    let arch = &model.arch;
    if states.len() != arch.n_layers {
        return Err(ReservoirError::DimensionMismatch {
            context: format!("{} state vectors for {} layers", states.len(), arch.n_layers),
        });
    }
    if input.len() != arch.input_dim {
        return Err(ReservoirError::DimensionMismatch {
            context: format!("input width {} != {}", input.len(), arch.input_dim),
        });
    }
    let mut new_states = Vec::with_capacity(arch.n_layers);
    for layer in 0..arch.n_layers {
        if states[layer].len() != arch.neurons_per_layer {
            return Err(ReservoirError::DimensionMismatch {
                context: format!("layer {layer} state has width {}", states[layer].len()),
            });
        }
        let layer_input: &Array1<T> = if layer == 0 {
            input
        } else {
            &new_states[layer - 1]
        };
        let mut pre = model.w_in[layer].dot(layer_input);
        model.w_res[layer].matvec_into(&states[layer], &mut pre);
        new_states.push(pre.mapv(|x| arch.activation.apply(x)));
    }
    Ok(new_states)
}

/// Runs the reservoir over an encoded sequence from the zero state; row `t`
/// of the result is the concatenated layer state after consuming sample `t`.
pub fn run_states<T: Scalar>(
    model: &ReservoirModel<T>,
    sequence: &EncodedSequence<T>,
) -> Result<Array2<T>, ReservoirError> {
    let arch = &model.arch;
    if sequence.width() != arch.input_dim {
        return Err(ReservoirError::DimensionMismatch {
            context: format!(
                "sequence width {} != input_dim {}",
                sequence.width(),
                arch.input_dim
            ),
        });
    }
    let t_len = sequence.n_samples();
    if t_len <= arch.washout {
        return Err(ReservoirError::InsufficientData {
            needed: arch.washout + 1,
            got: t_len,
        });
    }
    let mut states = model.zero_states();
    let mut out = Array2::zeros((t_len, arch.state_dim()));
    for t in 0..t_len {
        let input = sequence.samples().row(t).to_owned();
        states = update_state(model, &states, &input)?;
        let mut col = 0;
        for layer_state in &states {
            for &v in layer_state.iter() {
                out[[t, col]] = v;
                col += 1;
            }
        }
    }
    Ok(out)
}

/// Phase rows encoded as `(cos φ_1..cos φ_M, sin φ_1..sin φ_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence<T> {
    samples: Array2<T>,
}

impl<T: Scalar> EncodedSequence<T> {
    pub fn from_trajectory(trajectory: &PhaseTrajectory<T>) -> Self {
        Self::from_phase_rows(trajectory.phases())
    }

    pub fn from_phase_rows(phases: &Array2<T>) -> Self {
        let (t_len, m) = phases.dim();
        let mut samples = Array2::zeros((t_len, 2 * m));
        for t in 0..t_len {
            for e in 0..m {
                let (sin, cos) = phases[[t, e]].sin_cos();
                samples[[t, e]] = cos;
                samples[[t, m + e]] = sin;
            }
        }
        Self { samples }
    }

    /// Wraps raw encoded rows, checking that every pair is unit-norm.
    pub fn from_raw(samples: Array2<T>) -> Result<Self, ReservoirError> {
        if samples.ncols() % 2 != 0 {
            return Err(ReservoirError::DimensionMismatch {
                context: "encoded width must be even".into(),
            });
        }
        let m = samples.ncols() / 2;
        let tol = T::from_f64_lossy(1e-12);
        for t in 0..samples.nrows() {
            for e in 0..m {
                let n =
                    (samples[[t, e]] * samples[[t, e]] + samples[[t, m + e]] * samples[[t, m + e]])
                        .sqrt();
                if (n - T::one()).abs() > tol {
                    return Err(ReservoirError::DimensionMismatch {
                        context: format!("pair {e} at row {t} has norm {n}"),
                    });
                }
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &Array2<T> {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn width(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.samples.ncols() / 2
    }

    /// Truncates to the first `n` samples.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            samples: self
                .samples
                .slice(ndarray::s![..n.min(self.n_samples()), ..])
                .to_owned(),
        }
    }
}

/// Renormalizes one `(cos, sin)` pair to the unit circle; degenerate pairs
/// collapse to phase zero.
pub fn renormalize_pair<T: Scalar>(cos: T, sin: T) -> (T, T) {
    let norm = (cos * cos + sin * sin).sqrt();
    if norm <= T::from_f64_lossy(1e-300) {
        (T::one(), T::zero())
    } else {
        (cos / norm, sin / norm)
    }
}

/// Decodes an encoded row to phases in `[0, 2π)` after pair renormalization.
pub fn decode_phases<T: Scalar>(encoded: &[T]) -> Array1<T> {
    let m = encoded.len() / 2;
    Array1::from_iter((0..m).map(|e| {
        let (cos, sin) = renormalize_pair(encoded[e], encoded[m + e]);
        wrap_to_2pi(sin.atan2(cos))
    }))
}

/// Training-span restriction: an optional bootstrap subset (indices into the
/// training rows, duplicates allowed) and an optional prefix length.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions<'a> {
    pub subset_of_train: Option<&'a [usize]>,
    pub train_prefix: Option<usize>,
}

/// Trains the readout by ridge regression and records diagnostics.
///
/// Rows after the washout are split in time order: the first
/// `train_fraction` become regression rows mapping state(t−1) → encoded(t),
/// the remainder is held out for the validation RMSE. Only the readout is
/// written; all other weights stay untouched.
pub fn train_readout<T: Scalar>(
    model: ReservoirModel<T>,
    trajectory: &PhaseTrajectory<T>,
    train_fraction: f64,
) -> Result<ReservoirModel<T>, ReservoirError> {
    train_readout_opts(model, trajectory, train_fraction, FitOptions::default())
}

pub fn train_readout_opts<T: Scalar>(
    mut model: ReservoirModel<T>,
    trajectory: &PhaseTrajectory<T>,
    train_fraction: f64,
    opts: FitOptions<'_>,
) -> Result<ReservoirModel<T>, ReservoirError> {
    let arch = model.arch.clone();
    if 2 * trajectory.n_elements() != arch.input_dim {
        return Err(ReservoirError::DimensionMismatch {
            context: format!(
                "trajectory has {} elements, architecture expects {}",
                trajectory.n_elements(),
                arch.n_elements()
            ),
        });
    }
    let t_len = trajectory.n_steps();
    let span = training_span(&arch, t_len, train_fraction)?;

    let encoded = EncodedSequence::from_trajectory(trajectory);
    let states = run_states(&model, &encoded)?;
    let feature_dim = arch.feature_dim();

    // usable pairs: target t uses state row t−1, with t−1 past the washout
    let first_target = span.first_target;
    let n_usable = span.n_usable;
    let n_train = span.n_train;

    let effective_train = match opts.train_prefix {
        Some(p) => {
            if p == 0 || p > n_train {
                return Err(ReservoirError::InvalidArch {
                    context: format!("train_prefix {p} outside 1..={n_train}"),
                });
            }
            p
        }
        None => n_train,
    };

    // regression row indices, as offsets into the training span
    let row_offsets: Vec<usize> = match opts.subset_of_train {
        Some(subset) => {
            if subset.iter().any(|&i| i >= effective_train) {
                return Err(ReservoirError::InvalidArch {
                    context: "bootstrap subset index outside the training span".into(),
                });
            }
            subset.to_vec()
        }
        None => (0..effective_train).collect(),
    };
    if row_offsets.is_empty() {
        return Err(ReservoirError::InsufficientData { needed: 1, got: 0 });
    }

    let feature_row = |target_t: usize| -> Vec<T> {
        let mut row = Vec::with_capacity(feature_dim);
        row.extend(states.row(target_t - 1).iter().copied());
        row.push(T::one());
        row
    };

    // Normal equations A = XᵀX + λI, B = XᵀY, accumulated row by row.
    let mut a = Array2::<T>::zeros((feature_dim, feature_dim));
    let mut b = Array2::<T>::zeros((feature_dim, arch.output_dim));
    let mut mults: u128 = 0;
    let mut adds: u128 = 0;
    for &off in &row_offsets {
        let t = first_target + off;
        let x = feature_row(t);
        let y = encoded.samples().row(t);
        for i in 0..feature_dim {
            let xi = x[i];
            for j in i..feature_dim {
                a[[i, j]] += xi * x[j];
            }
            for (o, yo) in y.iter().enumerate() {
                b[[i, o]] += xi * *yo;
            }
        }
        mults += (feature_dim * (feature_dim + 1) / 2 + feature_dim * arch.output_dim) as u128;
        adds += (feature_dim * (feature_dim + 1) / 2 + feature_dim * arch.output_dim) as u128;
    }
    for i in 0..feature_dim {
        for j in 0..i {
            a[[i, j]] = a[[j, i]];
        }
    }
    let lambda = T::from_f64_lossy(arch.ridge_lambda);
    for i in 0..feature_dim {
        a[[i, i]] += lambda;
    }

    let solution = cholesky_solve(&a, &b).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } if arch.ridge_lambda == 0.0 => {
            ReservoirError::RegularizationRequired
        }
        other => ReservoirError::Linalg(other),
    })?;
    // Cholesky factor + two triangular solves per output column.
    mults += (feature_dim as u128).pow(3) / 6
        + (feature_dim as u128).pow(2) * arch.output_dim as u128;
    adds += (feature_dim as u128).pow(3) / 6
        + (feature_dim as u128).pow(2) * arch.output_dim as u128;

    let w_out = solution.t().to_owned(); // output_dim × feature_dim
    model.w_out = Some(w_out);

    // teacher-forced diagnostics on both spans
    let m = arch.n_elements();
    let predict_row = |target_t: usize, model: &ReservoirModel<T>| -> Array1<T> {
        let state = states.row(target_t - 1);
        let encoded_out = model
            .readout_from_state(state.as_slice().expect("contiguous row"))
            .expect("just trained");
        decode_phases(encoded_out.as_slice().unwrap())
    };
    let truth_row = |target_t: usize| -> Array1<T> {
        Array1::from_iter((0..m).map(|e| trajectory.phases()[[target_t, e]]))
    };
    let rmse_over = |range: Box<dyn Iterator<Item = usize>>, model: &ReservoirModel<T>| -> f64 {
        let mut sum = 0.0;
        for t in range {
            let p = predict_row(t, model);
            let y = truth_row(t);
            for e in 0..m {
                let d = crate::phase::angular_diff(p[e], y[e]).to_f64_lossy();
                sum += d * d;
            }
        }
        sum.sqrt()
    };
    let train_rmse = rmse_over(
        Box::new(row_offsets.iter().map(move |&off| first_target + off)),
        &model,
    );
    let validation_rmse = rmse_over(
        Box::new((first_target + n_train)..t_len),
        &model,
    );

    model.stats = Some(TrainingStats {
        n_train: row_offsets.len(),
        n_validation: n_usable - n_train,
        train_rmse,
        validation_rmse,
        actual_additions: adds,
        actual_multiplications: mults,
    });
    Ok(model)
}

/// Closed-form ridge fit `W = Yᵀ·X·(XᵀX + λI)⁻¹` for feature rows `X` and
/// target rows `Y`; the returned matrix maps a feature vector to an output.
pub fn fit_ridge<T: Scalar>(
    x: &Array2<T>,
    y: &Array2<T>,
    lambda: T,
) -> Result<Array2<T>, ReservoirError> {
    if x.nrows() != y.nrows() {
        return Err(ReservoirError::DimensionMismatch {
            context: format!("{} feature rows vs {} target rows", x.nrows(), y.nrows()),
        });
    }
    let f = x.ncols();
    let mut a = x.t().dot(x);
    for i in 0..f {
        a[[i, i]] += lambda;
    }
    let b = x.t().dot(y);
    let solution = cholesky_solve(&a, &b).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } if lambda == T::zero() => {
            ReservoirError::RegularizationRequired
        }
        other => ReservoirError::Linalg(other),
    })?;
    Ok(solution.t().to_owned())
}

/// Teacher-forced one-step predictions over a whole trajectory: row `i`
/// predicts target `first_target + i` from the state after the true sample
/// preceding it. Returns the predictions and the first target index.
pub fn one_step_predictions<T: Scalar>(
    model: &ReservoirModel<T>,
    trajectory: &PhaseTrajectory<T>,
) -> Result<(Array2<T>, usize), ReservoirError> {
    if !model.trained() {
        return Err(ReservoirError::NotTrained);
    }
    let arch = model.arch();
    let encoded = EncodedSequence::from_trajectory(trajectory);
    let states = run_states(model, &encoded)?;
    let first_target = arch.washout + 1;
    let t_len = trajectory.n_steps();
    if t_len <= first_target {
        return Err(ReservoirError::InsufficientData {
            needed: first_target + 1,
            got: t_len,
        });
    }
    let m = arch.n_elements();
    let mut predictions = Array2::zeros((t_len - first_target, m));
    for t in first_target..t_len {
        let state = states.row(t - 1);
        let out = model.readout_from_state(state.as_slice().expect("contiguous row"))?;
        let phases = decode_phases(out.as_slice().unwrap());
        predictions.row_mut(t - first_target).assign(&phases);
    }
    Ok((predictions, first_target))
}

/// One-step prediction: runs the states over the encoded history and decodes
/// the readout of the final state.
pub fn predict_next<T: Scalar>(
    model: &ReservoirModel<T>,
    history: &PhaseTrajectory<T>,
) -> Result<Array1<T>, ReservoirError> {
    if !model.trained() {
        return Err(ReservoirError::NotTrained);
    }
    let encoded = EncodedSequence::from_trajectory(history);
    let states = run_states(model, &encoded)?;
    let last = states.row(states.nrows() - 1);
    let out = model.readout_from_state(last.as_slice().expect("contiguous row"))?;
    Ok(decode_phases(out.as_slice().unwrap()))
}

/// Autoregressive forecast: each predicted vector is renormalized, fed back
/// as the next input, and decoded into the output trajectory.
pub fn forecast<T: Scalar>(
    model: &ReservoirModel<T>,
    history: &PhaseTrajectory<T>,
    horizon: usize,
) -> Result<PhaseTrajectory<T>, ReservoirError> {
    if !model.trained() {
        return Err(ReservoirError::NotTrained);
    }
    if horizon == 0 {
        return Err(ReservoirError::InvalidArch {
            context: "forecast horizon must be at least 1".into(),
        });
    }
    let arch = &model.arch;
    let encoded = EncodedSequence::from_trajectory(history);
    if encoded.n_samples() <= arch.washout {
        return Err(ReservoirError::InsufficientData {
            needed: arch.washout + 1,
            got: encoded.n_samples(),
        });
    }
    let mut states = model.zero_states();
    for t in 0..encoded.n_samples() {
        let input = encoded.samples().row(t).to_owned();
        states = update_state(model, &states, &input)?;
    }

    let m = arch.n_elements();
    let mut phases = Array2::zeros((horizon, m));
    for step in 0..horizon {
        let concat: Vec<T> = states.iter().flat_map(|s| s.iter().copied()).collect();
        let raw = model.readout_from_state(&concat)?;
        let mut fed_back = Array1::zeros(arch.output_dim);
        for e in 0..m {
            let (cos, sin) = renormalize_pair(raw[e], raw[m + e]);
            fed_back[e] = cos;
            fed_back[m + e] = sin;
            phases[[step, e]] = wrap_to_2pi(sin.atan2(cos));
        }
        if step + 1 < horizon {
            states = update_state(model, &states, &fed_back)?;
        }
    }
    PhaseTrajectory::new(phases, history.slot_interval_s(), history.origin()).map_err(|e| {
        ReservoirError::InvalidArch {
            context: format!("forecast produced an invalid trajectory: {e}"),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::TrajectoryOrigin;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use proptest::prelude::*;

    fn small_arch(m: usize) -> ReservoirArch {
        ReservoirArch {
            n_layers: 2,
            neurons_per_layer: 20,
            connectivity: 0.3,
            washout: 5,
            ..ReservoirArch::for_elements(m)
        }
    }

    fn sinusoid_trajectory(t_len: usize, m: usize) -> PhaseTrajectory<f64> {
        let phases = Array2::from_shape_fn((t_len, m), |(t, e)| {
            wrap_to_2pi(
                1.0 + 0.4 * e as f64
                    + 0.8 * (0.3 * t as f64 + 0.9 * e as f64).sin(),
            )
        });
        PhaseTrajectory::new(phases, 1.0, TrajectoryOrigin::Synthetic).unwrap()
    }

    fn constant_trajectory(t_len: usize, m: usize, value: f64) -> PhaseTrajectory<f64> {
        PhaseTrajectory::new(
            Array2::from_elem((t_len, m), value),
            1.0,
            TrajectoryOrigin::Synthetic,
        )
        .unwrap()
    }

    #[test]
    fn xavier_statistics_match_inverse_fan_in() {
        for &fan_in in &[1usize, 64] {
            let w = xavier_input_weights::<f64>(fan_in, 200, 500, 99).unwrap();
            let n = (200 * 500) as f64;
            let mean: f64 = w.iter().sum::<f64>() / n;
            let var: f64 = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let target = 1.0 / fan_in as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!(
                (var - target).abs() < 0.03 * target,
                "variance {var} vs {target}"
            );
        }
    }

    #[test]
    fn xavier_rejects_zero_fan_in() {
        assert!(matches!(
            xavier_input_weights::<f64>(0, 2, 2, 1),
            Err(ReservoirError::ZeroFanIn)
        ));
    }

    #[test]
    fn init_is_deterministic_and_respects_radius() {
        let arch = small_arch(3);
        let a = init_lsm::<f64>(&arch, InitMode::Xavier, 42).unwrap();
        let b = init_lsm::<f64>(&arch, InitMode::Xavier, 42).unwrap();
        for l in 0..arch.n_layers {
            assert_eq!(a.w_in(l), b.w_in(l));
            assert_eq!(a.w_res(l), b.w_res(l));
            let rho = a.measured_spectral_radius(l);
            assert!(
                (rho - arch.spectral_radius).abs() <= 1e-6,
                "layer {l} spectral radius {rho}"
            );
        }
    }

    #[test]
    fn full_connectivity_is_dense() {
        let mut arch = small_arch(2);
        arch.connectivity = 1.0;
        arch.neurons_per_layer = 8;
        let model = init_lsm::<f64>(&arch, InitMode::UniformRandom, 5).unwrap();
        assert_eq!(model.w_res(0).nnz(), 64);
    }

    #[test]
    fn update_state_zero_fixed_point_and_range() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 7).unwrap();
        let zeros = model.zero_states();
        let out = update_state(&model, &zeros, &Array1::zeros(arch.input_dim)).unwrap();
        assert!(out.iter().all(|s| s.iter().all(|&v| v == 0.0)));

        let input = Array1::from_elem(arch.input_dim, 0.9);
        let out = update_state(&model, &zeros, &input).unwrap();
        assert!(out
            .iter()
            .all(|s| s.iter().all(|&v| v > -1.0 && v < 1.0)));
    }

    #[test]
    fn update_state_scalar_case() {
        // 1 layer, 1 neuron, W_res = [0.5], W_in = [1]: tanh(0.5·0 + 1·1)
        let arch = ReservoirArch {
            n_layers: 1,
            neurons_per_layer: 1,
            input_dim: 2,
            output_dim: 2,
            connectivity: 1.0,
            spectral_radius: 0.5,
            rescale_spectral_radius: false,
            activation: Activation::Tanh,
            washout: 0,
            ridge_lambda: 0.0,
        };
        let w_in = vec![array![[1.0, 0.0]]];
        let w_res = vec![SparseMatrix::from_entries(1, 1, vec![(0, 0, 0.5)])];
        let model =
            ReservoirModel::from_parts(arch, InitMode::UniformRandom, 0, w_in, w_res, None, None)
                .unwrap();
        let out = update_state(&model, &[array![0.0]], &array![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(out[0][0], 1.0f64.tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[0][0], 0.761594, epsilon = 1e-6);
    }

    #[test]
    fn run_states_converges_on_constant_input() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 3).unwrap();
        let traj = constant_trajectory(300, 2, 1.2);
        let encoded = EncodedSequence::from_trajectory(&traj);
        let states = run_states(&model, &encoded).unwrap();
        let last = states.row(states.nrows() - 1);
        let prev = states.row(states.nrows() - 2);
        let diff: f64 = last
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-6, "state still moving by {diff}");
    }

    #[test]
    fn run_states_boundary_and_determinism() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 3).unwrap();
        let traj = constant_trajectory(arch.washout + 1, 2, 0.4);
        let encoded = EncodedSequence::from_trajectory(&traj);
        let states = run_states(&model, &encoded).unwrap();
        assert_eq!(states.nrows() - arch.washout, 1);

        let again = run_states(&model, &encoded).unwrap();
        assert_eq!(states, again);

        let too_short = constant_trajectory(arch.washout, 2, 0.4);
        assert!(matches!(
            run_states(&model, &EncodedSequence::from_trajectory(&too_short)),
            Err(ReservoirError::InsufficientData { .. })
        ));
    }

    #[test]
    fn echo_state_contraction_from_different_initial_states() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 11).unwrap();
        let traj = sinusoid_trajectory(500, 2);
        let encoded = EncodedSequence::from_trajectory(&traj);

        let mut s1 = model.zero_states();
        let mut s2: Vec<Array1<f64>> = {
            let mut rng = stream_rng(11, StreamTag::Learner, 9);
            (0..arch.n_layers)
                .map(|_| {
                    Array1::from_shape_fn(arch.neurons_per_layer, |_| {
                        rng::uniform::<f64>(&mut rng, -1.0, 1.0)
                    })
                })
                .collect()
        };
        let mut final_gap = f64::INFINITY;
        for t in 0..encoded.n_samples() {
            let input = encoded.samples().row(t).to_owned();
            s1 = update_state(&model, &s1, &input).unwrap();
            s2 = update_state(&model, &s2, &input).unwrap();
            final_gap = s1
                .iter()
                .zip(&s2)
                .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)))
                .sum::<f64>()
                .sqrt();
        }
        assert!(final_gap < 1e-6, "state gap after 500 steps: {final_gap}");
    }

    #[test]
    fn planted_solution_is_recovered_without_ridge() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 13).unwrap();
        let traj = sinusoid_trajectory(120, 2);
        let states = run_states(&model, &EncodedSequence::from_trajectory(&traj)).unwrap();
        let n = states.nrows();
        let f = arch.state_dim() + 1;
        let mut x = Array2::zeros((n, f));
        for t in 0..n {
            for c in 0..arch.state_dim() {
                x[[t, c]] = states[[t, c]];
            }
            x[[t, f - 1]] = 1.0;
        }
        let mut rng = stream_rng(1, StreamTag::Learner, 0);
        let planted = Array2::from_shape_fn((4, f), |_| rng::uniform::<f64>(&mut rng, -1.0, 1.0));
        let y = x.dot(&planted.t());
        let recovered = fit_ridge(&x, &y, 0.0).unwrap();
        let reproduced = x.dot(&recovered.t());
        let rmse = (&reproduced - &y)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt();
        assert!(rmse < 1e-8, "planted reproduction rmse {rmse}");
    }

    #[test]
    fn huge_ridge_shrinks_readout_to_zero() {
        let arch = small_arch(2);
        let mut arch = arch;
        arch.ridge_lambda = 1e12;
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 17).unwrap();
        let traj = sinusoid_trajectory(80, 2);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let max_w = trained
            .w_out()
            .unwrap()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(max_w < 1e-6, "readout entries up to {max_w}");
    }

    #[test]
    fn constant_trajectory_is_learned_exactly() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 19).unwrap();
        let traj = constant_trajectory(100, 2, 2.1);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let stats = trained.stats().unwrap();
        assert!(
            stats.validation_rmse < 1e-6,
            "validation rmse {}",
            stats.validation_rmse
        );
    }

    #[test]
    fn training_writes_only_the_readout() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 23).unwrap();
        let w_in_before: Vec<_> = (0..arch.n_layers).map(|l| model.w_in(l).clone()).collect();
        let w_res_before: Vec<_> = (0..arch.n_layers).map(|l| model.w_res(l).clone()).collect();
        let traj = sinusoid_trajectory(90, 2);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        for l in 0..arch.n_layers {
            assert_eq!(&w_in_before[l], trained.w_in(l));
            assert_eq!(&w_res_before[l], trained.w_res(l));
        }
        assert!(trained.trained());
    }

    #[test]
    fn readout_gradient_vanishes_at_solution() {
        // finite-difference check of the ridge objective around the solution
        let x = array![[1.0, 0.2, 1.0], [0.3, -0.4, 1.0], [0.7, 0.9, 1.0], [-0.2, 0.5, 1.0]];
        let y = array![[0.5, -0.1], [0.2, 0.3], [-0.6, 0.8], [0.1, 0.4]];
        let lambda = 1e-3;
        let w = fit_ridge(&x, &y, lambda).unwrap();
        // analytic gradient: 2(W(XᵀX + λI) − YᵀX)
        let mut a = x.t().dot(&x);
        for i in 0..3 {
            a[[i, i]] += lambda;
        }
        let grad = (w.dot(&a) - y.t().dot(&x)).mapv(|v| 2.0 * v);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = y.t().dot(&x).iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(gnorm / scale < 1e-8, "relative gradient norm {}", gnorm / scale);

        // finite differences agree with the analytic gradient away from the optimum
        let objective = |w: &Array2<f64>| -> f64 {
            let r = x.dot(&w.t()) - &y;
            r.iter().map(|v| v * v).sum::<f64>() + lambda * w.iter().map(|v| v * v).sum::<f64>()
        };
        let probe = w.mapv(|v| v + 0.05);
        let mut fd = Array2::zeros(probe.dim());
        let h = 1e-6;
        for i in 0..probe.nrows() {
            for j in 0..probe.ncols() {
                let mut plus = probe.clone();
                plus[[i, j]] += h;
                let mut minus = probe.clone();
                minus[[i, j]] -= h;
                fd[[i, j]] = (objective(&plus) - objective(&minus)) / (2.0 * h);
            }
        }
        let mut an = probe.dot(&a) - y.t().dot(&x);
        an.mapv_inplace(|v| 2.0 * v);
        for (f, g) in fd.iter().zip(an.iter()) {
            assert_relative_eq!(f, g, max_relative = 1e-4);
        }
    }

    #[test]
    fn prediction_error_bounded_by_recorded_rmse() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 29).unwrap();
        let traj = sinusoid_trajectory(100, 2);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let stats = *trained.stats().unwrap();
        // one-step prediction at the end of the training span
        let t_probe = arch.washout + 20;
        let history = traj.prefix(t_probe);
        let pred = predict_next(&trained, &history).unwrap();
        let mut err = 0.0f64;
        for e in 0..2 {
            let d = crate::phase::angular_diff(pred[e], traj.phases()[[t_probe, e]]);
            err += d * d;
        }
        assert!(err.sqrt() <= stats.train_rmse + 1e-9);
    }

    #[test]
    fn predict_is_deterministic_and_needs_training() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 31).unwrap();
        let traj = sinusoid_trajectory(90, 2);
        assert!(matches!(
            predict_next(&model, &traj),
            Err(ReservoirError::NotTrained)
        ));
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let a = predict_next(&trained, &traj).unwrap();
        let b = predict_next(&trained, &traj).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forecast_horizon_one_equals_predict_next() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 37).unwrap();
        let traj = sinusoid_trajectory(90, 2);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let one = forecast(&trained, &traj, 1).unwrap();
        let next = predict_next(&trained, &traj).unwrap();
        for e in 0..2 {
            assert_abs_diff_eq!(one.phases()[[0, e]], next[e], epsilon = 1e-12);
        }
    }

    #[test]
    fn forecast_holds_a_constant_for_fifty_steps() {
        let arch = small_arch(2);
        let model = init_lsm::<f64>(&arch, InitMode::Xavier, 41).unwrap();
        let traj = constant_trajectory(100, 2, 1.9);
        let trained = train_readout(model, &traj, 0.7).unwrap();
        let fc = forecast(&trained, &traj, 50).unwrap();
        for t in 0..50 {
            for e in 0..2 {
                let err = crate::phase::angular_diff(fc.phases()[[t, e]], 1.9).abs();
                assert!(err < 1e-3, "step {t} drifted by {err}");
            }
        }
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(phi in 0.0f64..std::f64::consts::TAU) {
            let traj = PhaseTrajectory::new(
                Array2::from_elem((1, 1), phi),
                1.0,
                TrajectoryOrigin::Synthetic,
            ).unwrap();
            let encoded = EncodedSequence::from_trajectory(&traj);
            let decoded = decode_phases(encoded.samples().row(0).as_slice().unwrap());
            let diff = crate::phase::angular_diff(decoded[0], phi).abs();
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn encoded_pairs_are_unit_norm(phi in -10.0f64..10.0) {
            let traj = PhaseTrajectory::new(
                Array2::from_elem((1, 1), wrap_to_2pi(phi)),
                1.0,
                TrajectoryOrigin::Synthetic,
            ).unwrap();
            let encoded = EncodedSequence::from_trajectory(&traj);
            let c: f64 = encoded.samples()[[0, 0]];
            let s: f64 = encoded.samples()[[0, 1]];
            prop_assert!(((c * c + s * s).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}

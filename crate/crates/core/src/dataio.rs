//! Trajectory ingestion and generation, plus persistence for trajectories,
//! models, ensembles and channel dumps.
//!
//! Text interchange is CSV with 17-significant-digit floats; models use a
//! little-endian binary container (`LSM-MODEL-v1` / `LSM-ENS-v1`) with a
//! trailing FNV-1a 64-bit checksum over everything that precedes it.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelSet};
use crate::ensemble::{BootstrapSpec, EnsembleError, EnsembleModel};
use crate::phase::wrap_to_2pi;
use crate::reservoir::{
    Activation, InitMode, ReservoirArch, ReservoirError, ReservoirModel, SparseMatrix,
    TrainingStats,
};
use crate::ris_link::{oracle_optimize_multistart, oracle_optimize_theta, LinkError, PhaseConfig};
use crate::rng::{self, stream_rng, StreamTag};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8] = b"LSM-MODEL-v1\n";
pub const ENSEMBLE_MAGIC: &[u8] = b"LSM-ENS-v1\n";
pub const CHANNEL_MAGIC: &[u8] = b"RIS-CH-v1\n";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {context}")]
    Parse { line: usize, context: String },
    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },
    #[error("bad header: expected `{expected}`, got `{got}`")]
    HeaderMismatch { expected: String, got: String },
    #[error("container version mismatch: expected {expected}")]
    VersionMismatch { expected: String },
    #[error("truncated container: {context}")]
    Truncated { context: String },
    #[error("checksum mismatch: payload corrupted")]
    ChecksumMismatch,
    #[error("invalid specification: {context}")]
    InvalidSpec { context: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Where a trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryOrigin {
    Oracle,
    Synthetic,
    External,
}

/// T×M matrix of surface phases, entries in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory<T> {
    phases: Array2<T>,
    slot_interval_s: f64,
    origin: TrajectoryOrigin,
}

impl<T: Scalar> PhaseTrajectory<T> {
    /// Wraps every entry into `[0, 2π)`; at least one step and one element
    /// are required.
    pub fn new(
        phases: Array2<T>,
        slot_interval_s: f64,
        origin: TrajectoryOrigin,
    ) -> Result<Self, DataError> {
        if phases.nrows() == 0 || phases.ncols() == 0 {
            return Err(DataError::InvalidSpec {
                context: "trajectory needs at least one step and one element".into(),
            });
        }
        if slot_interval_s <= 0.0 {
            return Err(DataError::InvalidSpec {
                context: "slot interval must be positive".into(),
            });
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(DataError::InvalidSpec {
                context: "trajectory contains non-finite phases".into(),
            });
        }
        Ok(Self {
            phases: phases.mapv(wrap_to_2pi),
            slot_interval_s,
            origin,
        })
    }

    pub fn phases(&self) -> &Array2<T> {
        &self.phases
    }

    pub fn n_steps(&self) -> usize {
        self.phases.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.phases.ncols()
    }

    pub fn slot_interval_s(&self) -> f64 {
        self.slot_interval_s
    }

    pub fn origin(&self) -> TrajectoryOrigin {
        self.origin
    }

    pub fn row(&self, t: usize) -> Array1<T> {
        self.phases.row(t).to_owned()
    }

    /// First `n` steps as a new trajectory.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.clamp(1, self.n_steps());
        Self {
            phases: self.phases.slice(ndarray::s![..n, ..]).to_owned(),
            slot_interval_s: self.slot_interval_s,
            origin: self.origin,
        }
    }

    /// Steps `start..` as a new trajectory.
    pub fn suffix(&self, start: usize) -> Self {
        let start = start.min(self.n_steps() - 1);
        Self {
            phases: self.phases.slice(ndarray::s![start.., ..]).to_owned(),
            slot_interval_s: self.slot_interval_s,
            origin: self.origin,
        }
    }

    /// Appends the rows of `other` (same element count).
    pub fn concat(&self, other: &Self) -> Result<Self, DataError> {
        if other.n_elements() != self.n_elements() {
            return Err(DataError::InvalidSpec {
                context: "cannot concatenate trajectories of different widths".into(),
            });
        }
        let mut phases = Array2::zeros((self.n_steps() + other.n_steps(), self.n_elements()));
        for (t, row) in self.phases.rows().into_iter().enumerate() {
            phases.row_mut(t).assign(&row);
        }
        for (t, row) in other.phases.rows().into_iter().enumerate() {
            phases.row_mut(self.n_steps() + t).assign(&row);
        }
        Ok(Self {
            phases,
            slot_interval_s: self.slot_interval_s,
            origin: self.origin,
        })
    }
}

/// Per-element waveform `φ(t) = wrap(a + b·t + c·sin(ω·t + ψ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementWave {
    pub offset_a: f64,
    pub trend_b: f64,
    pub amplitude_c: f64,
    pub omega: f64,
    pub psi: f64,
}

/// Ranges the per-element coefficients are drawn from when not explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveRanges {
    pub amplitude: (f64, f64),
    pub omega: (f64, f64),
    pub trend: (f64, f64),
}

impl Default for WaveRanges {
    fn default() -> Self {
        Self {
            amplitude: (0.3, 0.9),
            omega: (std::f64::consts::TAU / 40.0, std::f64::consts::TAU / 15.0),
            trend: (-0.02, 0.02),
        }
    }
}

/// Synthetic trajectory description: explicit waves or seed-drawn ones.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticCoefficients {
    Explicit(Vec<ElementWave>),
    Drawn {
        n_elements: usize,
        ranges: WaveRanges,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub coefficients: SyntheticCoefficients,
    pub t_len: usize,
    pub slot_interval_s: f64,
}

impl SyntheticSpec {
    pub fn drawn(n_elements: usize, t_len: usize) -> Self {
        Self {
            coefficients: SyntheticCoefficients::Drawn {
                n_elements,
                ranges: WaveRanges::default(),
            },
            t_len,
            slot_interval_s: 1.0,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.t_len == 0 {
            return Err(DataError::InvalidSpec {
                context: "synthetic trajectory needs at least one step".into(),
            });
        }
        match &self.coefficients {
            SyntheticCoefficients::Explicit(waves) => {
                if waves.is_empty() {
                    return Err(DataError::InvalidSpec {
                        context: "no element waves given".into(),
                    });
                }
                if waves.iter().any(|w| w.omega <= 0.0) {
                    return Err(DataError::InvalidSpec {
                        context: "omega must be positive".into(),
                    });
                }
            }
            SyntheticCoefficients::Drawn { n_elements, ranges } => {
                if *n_elements == 0 {
                    return Err(DataError::InvalidSpec {
                        context: "need at least one element".into(),
                    });
                }
                if ranges.omega.0 <= 0.0 || ranges.omega.0 > ranges.omega.1 {
                    return Err(DataError::InvalidSpec {
                        context: "omega range must be positive and ordered".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Generates `φ_m(t) = wrap(a_m + b_m·t + c_m·sin(ω_m·t + ψ_m))`,
/// deterministic per seed when the coefficients are drawn.
pub fn synthetic_trajectory<T: Scalar>(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<PhaseTrajectory<T>, DataError> {
    spec.validate()?;
    let waves: Vec<ElementWave> = match &spec.coefficients {
        SyntheticCoefficients::Explicit(waves) => waves.clone(),
        SyntheticCoefficients::Drawn { n_elements, ranges } => {
            let mut rng = stream_rng(seed, StreamTag::SyntheticTask, 0);
            (0..*n_elements)
                .map(|_| ElementWave {
                    offset_a: rng::uniform(&mut rng, 0.0, std::f64::consts::TAU),
                    trend_b: rng::uniform(&mut rng, ranges.trend.0, ranges.trend.1),
                    amplitude_c: rng::uniform(&mut rng, ranges.amplitude.0, ranges.amplitude.1),
                    omega: rng::uniform(&mut rng, ranges.omega.0, ranges.omega.1),
                    psi: rng::uniform(&mut rng, 0.0, std::f64::consts::TAU),
                })
                .collect()
        }
    };
    let phases = Array2::from_shape_fn((spec.t_len, waves.len()), |(t, e)| {
        let w = &waves[e];
        let t = t as f64;
        T::from_f64_lossy(w.offset_a + w.trend_b * t + w.amplitude_c * (w.omega * t + w.psi).sin())
    });
    PhaseTrajectory::new(phases, spec.slot_interval_s, TrajectoryOrigin::Synthetic)
}

/// How the per-slot oracle searches the phase grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub grid_b: usize,
    pub max_sweeps: usize,
    /// Restart slot 0 (or every slot when warm start is off) from every
    /// uniform grid configuration instead of a single zero start.
    pub multistart: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_b: 16,
            max_sweeps: 30,
            multistart: true,
        }
    }
}

/// Per-slot optimized phases for a channel slot sequence: the ground-truth
/// trajectory the predictors learn to track.
///
/// With `warm_start` each slot's ascent begins at the previous slot's
/// optimum, which keeps consecutive rows close under slow mobility.
pub fn oracle_trajectory<T: Scalar>(
    channel_slots: &[ChannelSet<T>],
    power_p: T,
    options: &OracleOptions,
    warm_start: bool,
) -> Result<PhaseTrajectory<T>, DataError> {
    let first = channel_slots.first().ok_or(DataError::InvalidSpec {
        context: "oracle needs at least one channel slot".into(),
    })?;
    let m = first.n_ris();
    let mut phases = Array2::zeros((channel_slots.len(), m));
    let mut previous: Option<PhaseConfig<T>> = None;
    for (t, slot) in channel_slots.iter().enumerate() {
        let solved = match (&previous, warm_start) {
            (Some(prev), true) => {
                oracle_optimize_theta(slot, power_p, options.grid_b, options.max_sweeps, Some(prev))?
            }
            _ => {
                if options.multistart {
                    oracle_optimize_multistart(slot, power_p, options.grid_b, options.max_sweeps)?
                } else {
                    oracle_optimize_theta(slot, power_p, options.grid_b, options.max_sweeps, None)?
                }
            }
        };
        for e in 0..m {
            phases[[t, e]] = solved.phases()[e];
        }
        previous = Some(solved);
    }
    PhaseTrajectory::new(phases, 1.0, TrajectoryOrigin::Oracle)
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
pub fn csv_float<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// One CSV row of phases in radians (the `PhaseConfig` wire format).
pub fn phase_row_csv<T: Scalar>(phases: &Array1<T>) -> String {
    phases
        .iter()
        .map(|&p| csv_float(p))
        .collect::<Vec<_>>()
        .join(",")
}

fn trajectory_header(m: usize) -> String {
    let mut header = String::from("t");
    for e in 0..m {
        header.push_str(&format!(",phi_{e}"));
    }
    header
}

/// Writes the `t,phi_0,...,phi_{M-1}` CSV.
pub fn save_trajectory<T: Scalar>(
    trajectory: &PhaseTrajectory<T>,
    path: &Path,
) -> Result<(), DataError> {
    let mut out = String::new();
    out.push_str(&trajectory_header(trajectory.n_elements()));
    out.push('\n');
    for t in 0..trajectory.n_steps() {
        out.push(' ');
        out.pop();
        out.push_str(&t.to_string());
        for e in 0..trajectory.n_elements() {
            out.push(',');
            out.push_str(&csv_float(trajectory.phases()[[t, e]]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// A loaded trajectory plus how many values had to be wrapped into `[0, 2π)`.
#[derive(Debug)]
pub struct TrajectoryLoad<T> {
    pub trajectory: PhaseTrajectory<T>,
    pub wrapped_values: usize,
}

/// Parses a trajectory CSV, enforcing the exact header and per-line phase
/// counts. Out-of-range values are wrapped and counted (the caller decides
/// how loudly to warn); non-finite values are rejected.
pub fn load_trajectory<T: Scalar>(path: &Path) -> Result<TrajectoryLoad<T>, DataError> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::Parse {
        line: 1,
        context: "empty file".into(),
    })?;
    let cols = header.split(',').count();
    if cols < 2 {
        return Err(DataError::HeaderMismatch {
            expected: trajectory_header(1),
            got: header.to_string(),
        });
    }
    let m = cols - 1;
    let expected = trajectory_header(m);
    if header.trim() != expected {
        return Err(DataError::HeaderMismatch {
            expected,
            got: header.to_string(),
        });
    }

    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut wrapped_values = 0usize;
    let two_pi = std::f64::consts::TAU;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m + 1 {
            return Err(DataError::Parse {
                line: line_no,
                context: format!("expected {} fields, found {}", m + 1, fields.len()),
            });
        }
        fields[0].trim().parse::<u64>().map_err(|e| DataError::Parse {
            line: line_no,
            context: format!("bad slot index `{}`: {e}", fields[0]),
        })?;
        let mut row = Vec::with_capacity(m);
        for field in &fields[1..] {
            let value: f64 = field.trim().parse().map_err(|e| DataError::Parse {
                line: line_no,
                context: format!("bad phase `{field}`: {e}"),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite { line: line_no });
            }
            if !(0.0..two_pi).contains(&value) {
                wrapped_values += 1;
            }
            row.push(T::from_f64_lossy(value));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::Parse {
            line: 1,
            context: "no data rows".into(),
        });
    }
    let phases = Array2::from_shape_fn((rows.len(), m), |(t, e)| rows[t][e]);
    if wrapped_values > 0 {
        log::warn!("load_trajectory: wrapped {wrapped_values} out-of-range phases into [0, 2π)");
    }
    Ok(TrajectoryLoad {
        trajectory: PhaseTrajectory::new(phases, 1.0, TrajectoryOrigin::External)?,
        wrapped_values,
    })
}

// ---------------------------------------------------------------------------
// binary containers
// ---------------------------------------------------------------------------

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8]) -> Self {
        Self {
            buf: magic.to_vec(),
        }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    fn finish(mut self) -> Vec<u8> {
        let checksum = fnv1a64(&self.buf);
        self.buf.extend_from_slice(&checksum.to_le_bytes());
        self.buf
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Verifies magic and trailing checksum, returning a cursor over the
    /// payload between them.
    fn open(data: &'a [u8], magic: &[u8]) -> Result<Self, DataError> {
        if data.len() < magic.len() + 8 {
            return Err(DataError::Truncated {
                context: "shorter than header plus checksum".into(),
            });
        }
        if &data[..magic.len()] != magic {
            return Err(DataError::VersionMismatch {
                expected: String::from_utf8_lossy(magic).trim().to_string(),
            });
        }
        let body_end = data.len() - 8;
        let stored = u64::from_le_bytes(data[body_end..].try_into().expect("8 bytes"));
        if fnv1a64(&data[..body_end]) != stored {
            return Err(DataError::ChecksumMismatch);
        }
        Ok(Self {
            data: &data[..body_end],
            pos: magic.len(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.pos + n > self.data.len() {
            return Err(DataError::Truncated {
                context: format!("while reading {what}"),
            });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8, DataError> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &str) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u128(&mut self, what: &str) -> Result<u128, DataError> {
        Ok(u128::from_le_bytes(self.take(16, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

fn write_matrix<T: Scalar>(w: &mut Writer, m: &Array2<T>) {
    w.u64(m.nrows() as u64);
    w.u64(m.ncols() as u64);
    for v in m.iter() {
        w.f64(v.to_f64_lossy());
    }
}

fn read_matrix<T: Scalar>(r: &mut Reader<'_>, what: &str) -> Result<Array2<T>, DataError> {
    let rows = r.u64(what)? as usize;
    let cols = r.u64(what)? as usize;
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = T::from_f64_lossy(r.f64(what)?);
        }
    }
    Ok(m)
}

fn model_payload<T: Scalar>(model: &ReservoirModel<T>) -> Vec<u8> {
    let arch = model.arch();
    let mut w = Writer::new(MODEL_MAGIC);
    w.u8(match model.init_mode() {
        InitMode::Xavier => 0,
        InitMode::UniformRandom => 1,
    });
    w.u8(match arch.activation {
        Activation::Tanh => 0,
        Activation::Softsign => 1,
    });
    w.u8(model.trained() as u8);
    w.u8(arch.rescale_spectral_radius as u8);
    w.u64(model.seed());
    w.u64(arch.n_layers as u64);
    w.u64(arch.neurons_per_layer as u64);
    w.u64(arch.input_dim as u64);
    w.u64(arch.output_dim as u64);
    w.u64(arch.washout as u64);
    w.f64(arch.connectivity);
    w.f64(arch.spectral_radius);
    w.f64(arch.ridge_lambda);
    match model.stats() {
        Some(stats) => {
            w.u8(1);
            w.u64(stats.n_train as u64);
            w.u64(stats.n_validation as u64);
            w.f64(stats.train_rmse);
            w.f64(stats.validation_rmse);
            w.u128(stats.actual_additions);
            w.u128(stats.actual_multiplications);
        }
        None => w.u8(0),
    }
    for layer in 0..arch.n_layers {
        write_matrix(&mut w, model.w_in(layer));
    }
    for layer in 0..arch.n_layers {
        let sparse = model.w_res(layer);
        w.u64(sparse.nrows() as u64);
        w.u64(sparse.ncols() as u64);
        w.u64(sparse.nnz() as u64);
        for &(i, j, v) in sparse.entries() {
            w.u64(i as u64);
            w.u64(j as u64);
            w.f64(v.to_f64_lossy());
        }
    }
    if let Some(w_out) = model.w_out() {
        write_matrix(&mut w, w_out);
    }
    w.finish()
}

fn model_from_bytes<T: Scalar>(data: &[u8]) -> Result<ReservoirModel<T>, DataError> {
    let mut r = Reader::open(data, MODEL_MAGIC)?;
    let init_mode = match r.u8("init mode")? {
        0 => InitMode::Xavier,
        1 => InitMode::UniformRandom,
        other => {
            return Err(DataError::Parse {
                line: 0,
                context: format!("unknown init mode {other}"),
            })
        }
    };
    let activation = match r.u8("activation")? {
        0 => Activation::Tanh,
        1 => Activation::Softsign,
        other => {
            return Err(DataError::Parse {
                line: 0,
                context: format!("unknown activation {other}"),
            })
        }
    };
    let trained = r.u8("trained flag")? != 0;
    let rescale = r.u8("rescale flag")? != 0;
    let seed = r.u64("seed")?;
    let n_layers = r.u64("n_layers")? as usize;
    let neurons = r.u64("neurons")? as usize;
    let input_dim = r.u64("input_dim")? as usize;
    let output_dim = r.u64("output_dim")? as usize;
    let washout = r.u64("washout")? as usize;
    let connectivity = r.f64("connectivity")?;
    let spectral_radius = r.f64("spectral radius")?;
    let ridge_lambda = r.f64("ridge lambda")?;
    let stats = if r.u8("stats flag")? != 0 {
        Some(TrainingStats {
            n_train: r.u64("n_train")? as usize,
            n_validation: r.u64("n_validation")? as usize,
            train_rmse: r.f64("train rmse")?,
            validation_rmse: r.f64("validation rmse")?,
            actual_additions: r.u128("additions")?,
            actual_multiplications: r.u128("multiplications")?,
        })
    } else {
        None
    };
    let arch = ReservoirArch {
        n_layers,
        neurons_per_layer: neurons,
        input_dim,
        output_dim,
        connectivity,
        spectral_radius,
        rescale_spectral_radius: rescale,
        activation,
        washout,
        ridge_lambda,
    };
    let mut w_in = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        w_in.push(read_matrix::<T>(&mut r, "input weights")?);
    }
    let mut w_res = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = r.u64("sparse rows")? as usize;
        let cols = r.u64("sparse cols")? as usize;
        let nnz = r.u64("sparse nnz")? as usize;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let i = r.u64("entry row")? as u32;
            let j = r.u64("entry col")? as u32;
            let v = T::from_f64_lossy(r.f64("entry value")?);
            entries.push((i, j, v));
        }
        w_res.push(SparseMatrix::from_entries(rows, cols, entries));
    }
    let w_out = if trained {
        Some(read_matrix::<T>(&mut r, "readout")?)
    } else {
        None
    };
    if !r.done() {
        return Err(DataError::Parse {
            line: 0,
            context: "trailing bytes in model container".into(),
        });
    }
    Ok(ReservoirModel::from_parts(
        arch, init_mode, seed, w_in, w_res, w_out, stats,
    )?)
}

/// Serializes a model into the `LSM-MODEL-v1` container.
pub fn save_model<T: Scalar>(model: &ReservoirModel<T>, path: &Path) -> Result<(), DataError> {
    fs::write(path, model_payload(model))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ReservoirModel<T>, DataError> {
    model_from_bytes(&fs::read(path)?)
}

/// Serializes an ensemble into the `LSM-ENS-v1` container; each learner is
/// embedded as a complete model container.
pub fn save_ensemble<T: Scalar>(model: &EnsembleModel<T>, path: &Path) -> Result<(), DataError> {
    let mut w = Writer::new(ENSEMBLE_MAGIC);
    w.u64(model.m1() as u64);
    for weight in model.weights() {
        w.f64(weight.to_f64_lossy());
    }
    let spec = model.bootstrap();
    w.u64(spec.block_len as u64);
    w.f64(spec.coverage);
    w.u64(spec.master_seed);
    for learner in model.learners() {
        let blob = model_payload(learner);
        w.u64(blob.len() as u64);
        w.bytes(&blob);
    }
    fs::write(path, w.finish())?;
    Ok(())
}

pub fn load_ensemble<T: Scalar>(path: &Path) -> Result<EnsembleModel<T>, DataError> {
    let data = fs::read(path)?;
    let mut r = Reader::open(&data, ENSEMBLE_MAGIC)?;
    let m1 = r.u64("m1")? as usize;
    let mut weights = Array1::zeros(m1);
    for i in 0..m1 {
        weights[i] = T::from_f64_lossy(r.f64("weight")?);
    }
    let bootstrap = BootstrapSpec {
        block_len: r.u64("block_len")? as usize,
        coverage: r.f64("coverage")?,
        master_seed: r.u64("master seed")?,
    };
    let mut learners = Vec::with_capacity(m1);
    for _ in 0..m1 {
        let len = r.u64("learner blob length")? as usize;
        let blob = r.take(len, "learner blob")?;
        learners.push(model_from_bytes::<T>(blob)?);
    }
    if !r.done() {
        return Err(DataError::Parse {
            line: 0,
            context: "trailing bytes in ensemble container".into(),
        });
    }
    Ok(EnsembleModel::from_parts(learners, weights, bootstrap)?)
}

/// Binary channel dump: dimensions, then every complex value as interleaved
/// little-endian f64 `(re, im)` pairs, then the checksum.
pub fn save_channel_dump<T: Scalar>(ch: &ChannelSet<T>, path: &Path) -> Result<(), DataError> {
    let mut w = Writer::new(CHANNEL_MAGIC);
    w.u64(ch.n_subcarriers() as u64);
    w.u64(ch.n_users() as u64);
    w.u64(ch.n_ris() as u64);
    w.u64(ch.n_tx() as u64);
    w.u64(ch.seed());
    w.u64(ch.slot() as u64);
    for s in 0..ch.n_subcarriers() {
        for v in ch.g(s).iter() {
            w.f64(v.re.to_f64_lossy());
            w.f64(v.im.to_f64_lossy());
        }
    }
    for k in 0..ch.n_users() {
        for s in 0..ch.n_subcarriers() {
            for v in ch.h_d(k, s).iter() {
                w.f64(v.re.to_f64_lossy());
                w.f64(v.im.to_f64_lossy());
            }
        }
    }
    for k in 0..ch.n_users() {
        for s in 0..ch.n_subcarriers() {
            for v in ch.h_r(k, s).iter() {
                w.f64(v.re.to_f64_lossy());
                w.f64(v.im.to_f64_lossy());
            }
        }
    }
    fs::write(path, w.finish())?;
    Ok(())
}

pub fn load_channel_dump<T: Scalar>(path: &Path) -> Result<ChannelSet<T>, DataError> {
    let data = fs::read(path)?;
    let mut r = Reader::open(&data, CHANNEL_MAGIC)?;
    let s_count = r.u64("S")? as usize;
    let k_users = r.u64("K")? as usize;
    let m = r.u64("M")? as usize;
    let n_t = r.u64("N_t")? as usize;
    let seed = r.u64("seed")?;
    let slot = r.u64("slot")? as usize;
    let complex = |r: &mut Reader<'_>| -> Result<Complex<T>, DataError> {
        let re = r.f64("re")?;
        let im = r.f64("im")?;
        Ok(Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im)))
    };
    let mut g = Vec::with_capacity(s_count);
    for _ in 0..s_count {
        let mut gs = Array2::zeros((m, n_t));
        for i in 0..m {
            for j in 0..n_t {
                gs[[i, j]] = complex(&mut r)?;
            }
        }
        g.push(gs);
    }
    let read_vectors = |r: &mut Reader<'_>, len: usize| -> Result<Vec<Vec<Array1<Complex<T>>>>, DataError> {
        let mut out = Vec::with_capacity(k_users);
        for _ in 0..k_users {
            let mut per_user = Vec::with_capacity(s_count);
            for _ in 0..s_count {
                let mut v = Array1::zeros(len);
                for i in 0..len {
                    v[i] = complex(r)?;
                }
                per_user.push(v);
            }
            out.push(per_user);
        }
        Ok(out)
    };
    let h_d = read_vectors(&mut r, n_t)?;
    let h_r = read_vectors(&mut r, m)?;
    if !r.done() {
        return Err(DataError::Parse {
            line: 0,
            context: "trailing bytes in channel dump".into(),
        });
    }
    Ok(ChannelSet::from_parts(g, h_d, h_r, seed, slot)?)
}

/// Debug CSV of one channel set: `component,user,subcarrier,row,col,re,im`.
pub fn save_channel_csv<T: Scalar>(ch: &ChannelSet<T>, path: &Path) -> Result<(), DataError> {
    let mut out = String::from("component,user,subcarrier,row,col,re,im\n");
    for s in 0..ch.n_subcarriers() {
        for ((i, j), v) in ch.g(s).indexed_iter() {
            out.push_str(&format!(
                "g,,{s},{i},{j},{},{}\n",
                csv_float(v.re),
                csv_float(v.im)
            ));
        }
    }
    for k in 0..ch.n_users() {
        for s in 0..ch.n_subcarriers() {
            for (i, v) in ch.h_d(k, s).iter().enumerate() {
                out.push_str(&format!(
                    "h_d,{k},{s},{i},0,{},{}\n",
                    csv_float(v.re),
                    csv_float(v.im)
                ));
            }
            for (i, v) in ch.h_r(k, s).iter().enumerate() {
                out.push_str(&format!(
                    "h_r,{k},{s},{i},0,{},{}\n",
                    csv_float(v.re),
                    csv_float(v.im)
                ));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel_set, ArrayGeometry, ChannelParams, ClusterConfig, LinkAngles};
    use crate::ensemble::train_ensemble;
    use crate::reservoir::{init_lsm, predict_next, train_readout};
    use approx::assert_abs_diff_eq;
    use tempfile::tempdir;

    fn arch(m: usize) -> ReservoirArch {
        ReservoirArch {
            n_layers: 2,
            neurons_per_layer: 15,
            connectivity: 0.3,
            washout: 5,
            ..ReservoirArch::for_elements(m)
        }
    }

    fn channel_fixture(seed: u64) -> ChannelSet<f64> {
        let cfg = ClusterConfig::defaults(2);
        let params = ChannelParams {
            ris_link: cfg.clone(),
            direct_link: cfg.clone(),
            reflect_link: cfg,
            bs: ArrayGeometry::for_band(3, 100e9, 10e9, 2).unwrap(),
            ris: ArrayGeometry::for_band(3, 100e9, 10e9, 2).unwrap(),
        };
        let angles = LinkAngles {
            bs_to_ris_departure: 0.3,
            bs_to_ris_arrival: -0.5,
            bs_to_users: vec![0.2],
            ris_to_users: vec![-0.1],
            ray_angle_spread: 0.1,
        };
        generate_channel_set(&params, &angles, seed).unwrap()
    }

    #[test]
    fn synthetic_constant_and_linear_sweep() {
        // b = c = 0: constant at wrap(a)
        let spec = SyntheticSpec {
            coefficients: SyntheticCoefficients::Explicit(vec![ElementWave {
                offset_a: 7.0,
                trend_b: 0.0,
                amplitude_c: 0.0,
                omega: 1.0,
                psi: 0.0,
            }]),
            t_len: 5,
            slot_interval_s: 1.0,
        };
        let traj = synthetic_trajectory::<f64>(&spec, 0).unwrap();
        for t in 0..5 {
            assert_abs_diff_eq!(
                traj.phases()[[t, 0]],
                7.0 - std::f64::consts::TAU,
                epsilon = 1e-12
            );
        }

        // a = 0, b = 2π/T, c = 0: one full linear sweep
        let t_len = 10usize;
        let spec = SyntheticSpec {
            coefficients: SyntheticCoefficients::Explicit(vec![ElementWave {
                offset_a: 0.0,
                trend_b: std::f64::consts::TAU / t_len as f64,
                amplitude_c: 0.0,
                omega: 1.0,
                psi: 0.0,
            }]),
            t_len,
            slot_interval_s: 1.0,
        };
        let traj = synthetic_trajectory::<f64>(&spec, 0).unwrap();
        assert_abs_diff_eq!(traj.phases()[[0, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            traj.phases()[[t_len / 2, 0]],
            std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let spec = SyntheticSpec::drawn(3, 20);
        let a = synthetic_trajectory::<f64>(&spec, 9).unwrap();
        let b = synthetic_trajectory::<f64>(&spec, 9).unwrap();
        assert_eq!(a.phases(), b.phases());
        let c = synthetic_trajectory::<f64>(&spec, 10).unwrap();
        assert_ne!(a.phases(), c.phases());
    }

    #[test]
    fn oracle_static_slots_hold_constant_after_first() {
        let ch = channel_fixture(5);
        let slots = vec![ch.clone(), ch.clone(), ch];
        let opts = OracleOptions {
            grid_b: 8,
            max_sweeps: 30,
            multistart: false,
        };
        let traj = oracle_trajectory(&slots, 1.0, &opts, true).unwrap();
        for t in 1..3 {
            for e in 0..3 {
                assert_eq!(traj.phases()[[t, e]], traj.phases()[[1, e]]);
            }
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let spec = SyntheticSpec::drawn(4, 12);
        let traj = synthetic_trajectory::<f64>(&spec, 3).unwrap();
        save_trajectory(&traj, &path).unwrap();
        let loaded = load_trajectory::<f64>(&path).unwrap();
        assert_eq!(loaded.wrapped_values, 0);
        for t in 0..12 {
            for e in 0..4 {
                assert_abs_diff_eq!(
                    loaded.trajectory.phases()[[t, e]],
                    traj.phases()[[t, e]],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn loader_wraps_and_counts_out_of_range_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("wrap.csv");
        fs::write(&path, "t,phi_0\n0,7.0\n1,1.0\n").unwrap();
        let loaded = load_trajectory::<f64>(&path).unwrap();
        assert_eq!(loaded.wrapped_values, 1);
        assert_abs_diff_eq!(
            loaded.trajectory.phases()[[0, 0]],
            7.0 - std::f64::consts::TAU,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(loaded.trajectory.phases()[[0, 0]], 0.71682, epsilon = 1e-5);
    }

    #[test]
    fn loader_reports_bad_rows_with_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,phi_0\n0,1.0\n1,2.0,3.0\n").unwrap();
        match load_trajectory::<f64>(&path) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "t,phi_0\n0,NaN\n").unwrap();
        assert!(matches!(
            load_trajectory::<f64>(&path),
            Err(DataError::NonFinite { line: 2 })
        ));

        fs::write(&path, "time,phi_0\n0,1.0\n").unwrap();
        assert!(matches!(
            load_trajectory::<f64>(&path),
            Err(DataError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn model_container_roundtrip_is_byte_exact() {
        let dir = tempdir().unwrap();
        let spec = SyntheticSpec::drawn(2, 60);
        let traj = synthetic_trajectory::<f64>(&spec, 7).unwrap();
        let model = init_lsm::<f64>(&arch(2), InitMode::Xavier, 3).unwrap();
        let trained = train_readout(model, &traj, 0.7).unwrap();

        let p1 = dir.path().join("model.bin");
        let p2 = dir.path().join("model2.bin");
        save_model(&trained, &p1).unwrap();
        let loaded = load_model::<f64>(&p1).unwrap();
        save_model(&loaded, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());

        // behavioral equality on a probe history
        let probe = traj.prefix(30);
        let a = predict_next(&trained, &probe).unwrap();
        let b = predict_next(&loaded, &probe).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_containers_fail_closed() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = init_lsm::<f64>(&arch(2), InitMode::Xavier, 3).unwrap();
        save_model(&model, &path).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        // header corruption → version error
        let mut bad_header = bytes.clone();
        bad_header[0] = b'X';
        fs::write(&path, &bad_header).unwrap();
        assert!(matches!(
            load_model::<f64>(&path),
            Err(DataError::VersionMismatch { .. })
        ));

        // payload corruption → checksum error
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model::<f64>(&path),
            Err(DataError::ChecksumMismatch)
        ));

        // truncation → truncated/checksum error
        let model_bytes = fs::read(&path).unwrap();
        fs::write(&path, &model_bytes[..10]).unwrap();
        assert!(load_model::<f64>(&path).is_err());
    }

    #[test]
    fn ensemble_container_roundtrip() {
        let dir = tempdir().unwrap();
        let spec = SyntheticSpec::drawn(2, 70);
        let traj = synthetic_trajectory::<f64>(&spec, 13).unwrap();
        let ens = train_ensemble(
            &arch(2),
            &traj,
            0.7,
            3,
            &crate::ensemble::BootstrapSpec::new(5),
        )
        .unwrap();
        let path = dir.path().join("ens.bin");
        save_ensemble(&ens, &path).unwrap();
        let loaded = load_ensemble::<f64>(&path).unwrap();
        assert_eq!(loaded.m1(), 3);
        assert_eq!(loaded.weights(), ens.weights());
        let fa = crate::ensemble::ensemble_forecast(&ens, &traj, 4).unwrap();
        let fb = crate::ensemble::ensemble_forecast(&loaded, &traj, 4).unwrap();
        assert_eq!(fa.phases(), fb.phases());
    }

    #[test]
    fn channel_dump_roundtrip() {
        let dir = tempdir().unwrap();
        let ch = channel_fixture(11);
        let path = dir.path().join("ch.bin");
        save_channel_dump(&ch, &path).unwrap();
        let loaded = load_channel_dump::<f64>(&path).unwrap();
        assert_eq!(loaded.n_subcarriers(), ch.n_subcarriers());
        for s in 0..ch.n_subcarriers() {
            assert_eq!(loaded.g(s), ch.g(s));
            assert_eq!(loaded.h_d(0, s), ch.h_d(0, s));
            assert_eq!(loaded.h_r(0, s), ch.h_r(0, s));
        }
        // CSV export writes without error
        save_channel_csv(&ch, &dir.path().join("ch.csv")).unwrap();
    }
}

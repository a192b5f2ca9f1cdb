//! Declarative experiment configuration.
//!
//! A run starts from a profile's defaults (`desk` finishes in minutes on a
//! laptop, `paper` uses the full-scale system dimensions), overlays an
//! optional TOML file, then applies command-line overrides. Validation
//! collects every problem before any work starts.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ristrack_core::channel::{
    ArrayGeometry, ChannelError, ChannelParams, ClusterConfig, LinkAngles, MobilityModel,
};
use ristrack_core::dataio::{SyntheticCoefficients, SyntheticSpec, WaveRanges};
use ristrack_core::reservoir::{Activation, ReservoirArch};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small dimensions, finishes in minutes; the acceptance suite runs here.
    Desk,
    /// Full-scale system dimensions (256 antennas, 8×8 surface, 128 subcarriers).
    Paper,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Desk => write!(f, "desk"),
            Profile::Paper => write!(f, "paper"),
        }
    }
}

/// Evaluated schemes and baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    XavierLsm,
    RandomInitLsm,
    Ensemble,
    RandomReflection,
    WithoutRis,
    WithoutDirectLink,
    Oracle,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::XavierLsm => "xavier_lsm",
            Scheme::RandomInitLsm => "random_init_lsm",
            Scheme::Ensemble => "ensemble",
            Scheme::RandomReflection => "random_reflection",
            Scheme::WithoutRis => "without_ris",
            Scheme::WithoutDirectLink => "without_direct_link",
            Scheme::Oracle => "oracle",
        }
    }

    /// Schemes that train a predictor on the tracked phases.
    pub fn is_predictor(self) -> bool {
        matches!(
            self,
            Scheme::XavierLsm | Scheme::RandomInitLsm | Scheme::Ensemble
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemConfig {
    pub n_t: usize,
    pub ris_m: usize,
    pub k_users: usize,
    pub s_subcarriers: usize,
    pub carrier_ghz: f64,
    pub bandwidth_ghz: f64,
    pub tx_power: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelSection {
    pub n_clusters: usize,
    pub n_rays_per_cluster: usize,
    pub cluster_delay_ns: (f64, f64),
    pub ray_offset_ns: (f64, f64),
    pub tap_spacing_ns: f64,
    pub n_taps: usize,
    pub pulse_rolloff: f64,
    pub gain_correlation: f64,
    pub angular_rate_rad_per_slot: f64,
    pub ray_angle_spread_rad: f64,
    pub bs_to_ris_departure_rad: f64,
    pub bs_to_ris_arrival_rad: f64,
    pub user_angle_base_rad: f64,
    pub user_angle_step_rad: f64,
    pub ris_user_angle_base_rad: f64,
    pub ris_user_angle_step_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LearnerSection {
    pub n_layers: usize,
    pub neurons_per_layer: usize,
    pub connectivity: f64,
    pub spectral_radius: f64,
    pub rescale_spectral_radius: bool,
    pub activation: String,
    pub washout: usize,
    pub ridge_lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSection {
    pub m1: usize,
    pub block_len: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleSection {
    pub t_slots: usize,
    pub slot_interval_s: f64,
    pub train_fraction: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepSection {
    pub k_list: Vec<usize>,
    pub ris_sizes: Vec<usize>,
    pub n_seeds: usize,
    /// Slots the SE sweep evaluates after the tracked span.
    pub se_eval_horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleSection {
    pub grid_b: usize,
    pub max_sweeps: usize,
    pub multistart_first_slot: bool,
    pub warm_start: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TaskSection {
    /// `synthetic` or `oracle` phase source for training/variance/tracking.
    pub source: String,
    pub task_seed: u64,
    pub amplitude_range: (f64, f64),
    pub omega_range: (f64, f64),
    pub trend_range: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportSection {
    pub epochs: usize,
    pub batch_sizes: Vec<usize>,
    pub element_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    pub output_dir: String,
    pub baselines: Vec<Scheme>,
    pub system: SystemConfig,
    pub channel: ChannelSection,
    pub learner: LearnerSection,
    pub ensemble: EnsembleSection,
    pub schedule: ScheduleSection,
    pub sweeps: SweepSection,
    pub oracle: OracleSection,
    pub task: TaskSection,
    pub report: ReportSection,
}

impl ExperimentConfig {
    pub fn defaults(profile: Profile) -> Self {
        let desk = matches!(profile, Profile::Desk);
        Self {
            profile,
            seed: 42,
            output_dir: "out".into(),
            baselines: vec![
                Scheme::XavierLsm,
                Scheme::RandomInitLsm,
                Scheme::Ensemble,
                Scheme::RandomReflection,
                Scheme::WithoutRis,
                Scheme::WithoutDirectLink,
                Scheme::Oracle,
            ],
            system: SystemConfig {
                n_t: if desk { 16 } else { 256 },
                ris_m: if desk { 16 } else { 64 },
                k_users: if desk { 2 } else { 4 },
                s_subcarriers: if desk { 8 } else { 128 },
                carrier_ghz: 100.0,
                bandwidth_ghz: 10.0,
                tx_power: 10.0,
                noise_variance: 1.0,
            },
            channel: ChannelSection {
                n_clusters: 3,
                n_rays_per_cluster: 1,
                cluster_delay_ns: (0.0, 20.0),
                ray_offset_ns: (-0.1, 0.1),
                tap_spacing_ns: 2.0,
                n_taps: 16,
                pulse_rolloff: 0.3,
                gain_correlation: 0.99,
                angular_rate_rad_per_slot: 0.002,
                ray_angle_spread_rad: 0.1,
                bs_to_ris_departure_rad: 0.35,
                bs_to_ris_arrival_rad: -0.6,
                user_angle_base_rad: 0.15,
                user_angle_step_rad: 0.45,
                ris_user_angle_base_rad: -0.25,
                ris_user_angle_step_rad: 0.4,
            },
            learner: LearnerSection {
                n_layers: 5,
                neurons_per_layer: if desk { 40 } else { 100 },
                connectivity: 0.1,
                spectral_radius: 0.9,
                rescale_spectral_radius: true,
                activation: "tanh".into(),
                washout: 10,
                ridge_lambda: 1e-6,
            },
            ensemble: EnsembleSection {
                m1: 15,
                block_len: 10,
                coverage: 0.8,
            },
            schedule: ScheduleSection {
                t_slots: 100,
                slot_interval_s: 1.0,
                train_fraction: 0.7,
                horizon: 50,
            },
            sweeps: SweepSection {
                k_list: if desk {
                    vec![1, 2, 4]
                } else {
                    vec![4, 8, 12]
                },
                ris_sizes: if desk {
                    vec![4, 9, 16, 25]
                } else {
                    vec![64, 81, 100, 121]
                },
                n_seeds: 20,
                se_eval_horizon: 10,
            },
            oracle: OracleSection {
                grid_b: 16,
                max_sweeps: 30,
                multistart_first_slot: true,
                warm_start: true,
            },
            task: TaskSection {
                source: "synthetic".into(),
                task_seed: 424_242,
                amplitude_range: (0.3, 0.9),
                omega_range: (std::f64::consts::TAU / 50.0, std::f64::consts::TAU / 20.0),
                trend_range: (0.0, 0.0),
            },
            report: ReportSection {
                epochs: 10,
                batch_sizes: vec![4, 8, 16, 32],
                element_index: 0,
            },
        }
    }

    /// Profile defaults overlaid with an optional TOML file and CLI flags.
    pub fn resolve(
        profile: Profile,
        config_path: Option<&Path>,
        seed_override: Option<u64>,
        out_override: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(profile);
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)?;
            let partial: PartialConfig = toml::from_str(&text)?;
            partial.apply(&mut cfg);
        }
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        if let Some(out) = out_override {
            cfg.output_dir = out.display().to_string();
        }
        Ok(cfg)
    }

    pub fn activation(&self) -> Result<Activation, String> {
        match self.learner.activation.as_str() {
            "tanh" => Ok(Activation::Tanh),
            "softsign" => Ok(Activation::Softsign),
            other => Err(format!(
                "learner.activation must be `tanh` or `softsign`, got `{other}`"
            )),
        }
    }

    /// Collects every validation problem; empty means the config is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let sys = &self.system;
        if sys.n_t == 0 || sys.ris_m == 0 || sys.k_users == 0 || sys.s_subcarriers == 0 {
            errors.push("system dimensions must all be at least 1".into());
        }
        if sys.k_users > sys.n_t {
            errors.push(format!(
                "zero-forcing needs K <= N_t, got K = {} and N_t = {}",
                sys.k_users, sys.n_t
            ));
        }
        if sys.carrier_ghz <= 0.0 || sys.bandwidth_ghz < 0.0 {
            errors.push("carrier must be positive and bandwidth nonnegative".into());
        }
        if sys.tx_power <= 0.0 || sys.noise_variance <= 0.0 {
            errors.push("tx_power and noise_variance must be positive".into());
        }

        let ch = &self.channel;
        if ch.cluster_delay_ns.0 > ch.cluster_delay_ns.1 {
            errors.push("channel.cluster_delay_ns interval is reversed".into());
        }
        if ch.ray_offset_ns.0 > ch.ray_offset_ns.1 {
            errors.push("channel.ray_offset_ns interval is reversed".into());
        }
        if ch.n_clusters >= 1 && ch.n_rays_per_cluster == 0 {
            errors.push("channel.n_rays_per_cluster must be >= 1 when clusters exist".into());
        }
        if ch.tap_spacing_ns <= 0.0 || ch.n_taps == 0 {
            errors.push("channel tap grid needs positive spacing and >= 1 taps".into());
        }
        if !(0.0..=1.0).contains(&ch.gain_correlation) {
            errors.push("channel.gain_correlation must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&ch.pulse_rolloff) {
            errors.push("channel.pulse_rolloff must lie in [0, 1]".into());
        }

        let learner = &self.learner;
        if learner.n_layers == 0 || learner.neurons_per_layer == 0 {
            errors.push("learner needs at least one layer and one neuron".into());
        }
        if !(learner.connectivity > 0.0 && learner.connectivity <= 1.0) {
            errors.push("learner.connectivity must lie in (0, 1]".into());
        }
        if learner.spectral_radius <= 0.0 {
            errors.push("learner.spectral_radius must be positive".into());
        }
        if learner.ridge_lambda < 0.0 {
            errors.push("learner.ridge_lambda must be nonnegative".into());
        }
        if let Err(e) = self.activation() {
            errors.push(e);
        }

        let ens = &self.ensemble;
        if ens.m1 == 0 {
            errors.push("ensemble.m1 must be at least 1".into());
        }
        if ens.block_len < 2 {
            errors.push("ensemble.block_len must be at least 2".into());
        }
        if !(ens.coverage > 0.0 && ens.coverage <= 1.0) {
            errors.push("ensemble.coverage must lie in (0, 1]".into());
        }

        let sched = &self.schedule;
        if !(sched.train_fraction > 0.0 && sched.train_fraction < 1.0) {
            errors.push(format!(
                "schedule.train_fraction must lie strictly inside (0, 1), got {}",
                sched.train_fraction
            ));
        }
        if sched.horizon == 0 {
            errors.push("schedule.horizon must be at least 1".into());
        }
        if sched.t_slots < learner.washout + 4 {
            errors.push(format!(
                "schedule.t_slots ({}) too short for washout {} (need washout + 4)",
                sched.t_slots, learner.washout
            ));
        }
        if sched.slot_interval_s <= 0.0 {
            errors.push("schedule.slot_interval_s must be positive".into());
        }

        let sweeps = &self.sweeps;
        if sweeps.n_seeds == 0 {
            errors.push("sweeps.n_seeds must be at least 1".into());
        }
        if sweeps.k_list.is_empty() {
            errors.push("sweeps.k_list must not be empty".into());
        }
        if sweeps.ris_sizes.is_empty() {
            errors.push("sweeps.ris_sizes must not be empty".into());
        }
        for &k in &sweeps.k_list {
            if k == 0 || k > sys.n_t {
                errors.push(format!(
                    "sweeps.k_list entry {k} infeasible for N_t = {} (zero-forcing)",
                    sys.n_t
                ));
            }
        }
        if sweeps.ris_sizes.iter().any(|&m| m == 0) {
            errors.push("sweeps.ris_sizes entries must be at least 1".into());
        }
        if sweeps.se_eval_horizon == 0 {
            errors.push("sweeps.se_eval_horizon must be at least 1".into());
        }

        let oracle = &self.oracle;
        if oracle.grid_b < 2 {
            errors.push("oracle.grid_b must be at least 2".into());
        }
        if oracle.max_sweeps == 0 {
            errors.push("oracle.max_sweeps must be at least 1".into());
        }

        let task = &self.task;
        if !matches!(task.source.as_str(), "synthetic" | "oracle") {
            errors.push(format!(
                "task.source must be `synthetic` or `oracle`, got `{}`",
                task.source
            ));
        }
        if task.omega_range.0 <= 0.0 || task.omega_range.0 > task.omega_range.1 {
            errors.push("task.omega_range must be positive and ordered".into());
        }
        if task.amplitude_range.0 > task.amplitude_range.1 {
            errors.push("task.amplitude_range is reversed".into());
        }
        if task.trend_range.0 > task.trend_range.1 {
            errors.push("task.trend_range is reversed".into());
        }

        let report = &self.report;
        if report.epochs == 0 {
            errors.push("report.epochs must be at least 1".into());
        }
        if report.batch_sizes.is_empty() || report.batch_sizes.iter().any(|&b| b == 0) {
            errors.push("report.batch_sizes must be nonempty positive".into());
        }
        if report.element_index >= sys.ris_m {
            errors.push(format!(
                "report.element_index {} out of range for M = {}",
                report.element_index, sys.ris_m
            ));
        }

        errors
    }

    pub fn validated(&self) -> Result<(), ConfigError> {
        let errors = self.validate();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    // ---- derived core objects -------------------------------------------

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            n_clusters: self.channel.n_clusters,
            n_rays_per_cluster: self.channel.n_rays_per_cluster,
            cluster_delay_range: (
                self.channel.cluster_delay_ns.0 * 1e-9,
                self.channel.cluster_delay_ns.1 * 1e-9,
            ),
            ray_delay_offset_range: (
                self.channel.ray_offset_ns.0 * 1e-9,
                self.channel.ray_offset_ns.1 * 1e-9,
            ),
            gain_distribution: Default::default(),
            cp_length_t: self.channel.tap_spacing_ns * 1e-9,
            n_delay_taps_d: self.channel.n_taps,
            n_subcarriers_s: self.system.s_subcarriers,
            pulse_rolloff: self.channel.pulse_rolloff,
        }
    }

    /// Channel parameters for a given surface size (the K/RIS sweeps swap
    /// these per point).
    pub fn channel_params(&self, ris_m: usize) -> Result<ChannelParams<f64>, ConfigError> {
        let cfg = self.cluster_config();
        Ok(ChannelParams {
            ris_link: cfg.clone(),
            direct_link: cfg.clone(),
            reflect_link: cfg,
            bs: ArrayGeometry::for_band(
                self.system.n_t,
                self.system.carrier_ghz * 1e9,
                self.system.bandwidth_ghz * 1e9,
                self.system.s_subcarriers,
            )?,
            ris: ArrayGeometry::for_band(
                ris_m,
                self.system.carrier_ghz * 1e9,
                self.system.bandwidth_ghz * 1e9,
                self.system.s_subcarriers,
            )?,
        })
    }

    pub fn link_angles(&self, k_users: usize) -> LinkAngles<f64> {
        let ch = &self.channel;
        LinkAngles {
            bs_to_ris_departure: ch.bs_to_ris_departure_rad,
            bs_to_ris_arrival: ch.bs_to_ris_arrival_rad,
            bs_to_users: (0..k_users)
                .map(|k| ch.user_angle_base_rad + ch.user_angle_step_rad * k as f64)
                .collect(),
            ris_to_users: (0..k_users)
                .map(|k| ch.ris_user_angle_base_rad + ch.ris_user_angle_step_rad * k as f64)
                .collect(),
            ray_angle_spread: ch.ray_angle_spread_rad,
        }
    }

    pub fn mobility(&self, k_users: usize, n_slots: usize) -> MobilityModel<f64> {
        MobilityModel {
            initial_angles: self.link_angles(k_users),
            angular_rate: self.channel.angular_rate_rad_per_slot,
            slot_interval_s: self.schedule.slot_interval_s,
            n_slots,
            gain_correlation: self.channel.gain_correlation,
        }
    }

    /// Reservoir architecture for a surface of `m` elements.
    pub fn reservoir_arch(&self, m: usize) -> ReservoirArch {
        let l = &self.learner;
        ReservoirArch {
            n_layers: l.n_layers,
            neurons_per_layer: l.neurons_per_layer,
            input_dim: 2 * m,
            output_dim: 2 * m,
            connectivity: l.connectivity,
            spectral_radius: l.spectral_radius,
            rescale_spectral_radius: l.rescale_spectral_radius,
            activation: self.activation().expect("validated"),
            washout: l.washout,
            ridge_lambda: l.ridge_lambda,
        }
    }

    /// Pinned synthetic task for a surface of `m` elements.
    pub fn synthetic_spec(&self, m: usize, t_len: usize) -> SyntheticSpec {
        SyntheticSpec {
            coefficients: SyntheticCoefficients::Drawn {
                n_elements: m,
                ranges: WaveRanges {
                    amplitude: self.task.amplitude_range,
                    omega: self.task.omega_range,
                    trend: self.task.trend_range,
                },
            },
            t_len,
            slot_interval_s: self.schedule.slot_interval_s,
        }
    }

    /// The resolved configuration as TOML, embedded in every output file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

// --- partial overlay for config files --------------------------------------

fn ov<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    profile: Option<Profile>,
    seed: Option<u64>,
    output_dir: Option<String>,
    baselines: Option<Vec<Scheme>>,
    #[serde(default)]
    system: PartialSystem,
    #[serde(default)]
    channel: PartialChannel,
    #[serde(default)]
    learner: PartialLearner,
    #[serde(default)]
    ensemble: PartialEnsemble,
    #[serde(default)]
    schedule: PartialSchedule,
    #[serde(default)]
    sweeps: PartialSweeps,
    #[serde(default)]
    oracle: PartialOracle,
    #[serde(default)]
    task: PartialTask,
    #[serde(default)]
    report: PartialReport,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialSystem {
    n_t: Option<usize>,
    ris_m: Option<usize>,
    k_users: Option<usize>,
    s_subcarriers: Option<usize>,
    carrier_ghz: Option<f64>,
    bandwidth_ghz: Option<f64>,
    tx_power: Option<f64>,
    noise_variance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialChannel {
    n_clusters: Option<usize>,
    n_rays_per_cluster: Option<usize>,
    cluster_delay_ns: Option<(f64, f64)>,
    ray_offset_ns: Option<(f64, f64)>,
    tap_spacing_ns: Option<f64>,
    n_taps: Option<usize>,
    pulse_rolloff: Option<f64>,
    gain_correlation: Option<f64>,
    angular_rate_rad_per_slot: Option<f64>,
    ray_angle_spread_rad: Option<f64>,
    bs_to_ris_departure_rad: Option<f64>,
    bs_to_ris_arrival_rad: Option<f64>,
    user_angle_base_rad: Option<f64>,
    user_angle_step_rad: Option<f64>,
    ris_user_angle_base_rad: Option<f64>,
    ris_user_angle_step_rad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialLearner {
    n_layers: Option<usize>,
    neurons_per_layer: Option<usize>,
    connectivity: Option<f64>,
    spectral_radius: Option<f64>,
    rescale_spectral_radius: Option<bool>,
    activation: Option<String>,
    washout: Option<usize>,
    ridge_lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialEnsemble {
    m1: Option<usize>,
    block_len: Option<usize>,
    coverage: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialSchedule {
    t_slots: Option<usize>,
    slot_interval_s: Option<f64>,
    train_fraction: Option<f64>,
    horizon: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialSweeps {
    k_list: Option<Vec<usize>>,
    ris_sizes: Option<Vec<usize>>,
    n_seeds: Option<usize>,
    se_eval_horizon: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialOracle {
    grid_b: Option<usize>,
    max_sweeps: Option<usize>,
    multistart_first_slot: Option<bool>,
    warm_start: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialTask {
    source: Option<String>,
    task_seed: Option<u64>,
    amplitude_range: Option<(f64, f64)>,
    omega_range: Option<(f64, f64)>,
    trend_range: Option<(f64, f64)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialReport {
    epochs: Option<usize>,
    batch_sizes: Option<Vec<usize>>,
    element_index: Option<usize>,
}

impl PartialConfig {
    fn apply(self, cfg: &mut ExperimentConfig) {
        ov(&mut cfg.profile, self.profile);
        ov(&mut cfg.seed, self.seed);
        ov(&mut cfg.output_dir, self.output_dir);
        ov(&mut cfg.baselines, self.baselines);

        ov(&mut cfg.system.n_t, self.system.n_t);
        ov(&mut cfg.system.ris_m, self.system.ris_m);
        ov(&mut cfg.system.k_users, self.system.k_users);
        ov(&mut cfg.system.s_subcarriers, self.system.s_subcarriers);
        ov(&mut cfg.system.carrier_ghz, self.system.carrier_ghz);
        ov(&mut cfg.system.bandwidth_ghz, self.system.bandwidth_ghz);
        ov(&mut cfg.system.tx_power, self.system.tx_power);
        ov(&mut cfg.system.noise_variance, self.system.noise_variance);

        ov(&mut cfg.channel.n_clusters, self.channel.n_clusters);
        ov(
            &mut cfg.channel.n_rays_per_cluster,
            self.channel.n_rays_per_cluster,
        );
        ov(&mut cfg.channel.cluster_delay_ns, self.channel.cluster_delay_ns);
        ov(&mut cfg.channel.ray_offset_ns, self.channel.ray_offset_ns);
        ov(&mut cfg.channel.tap_spacing_ns, self.channel.tap_spacing_ns);
        ov(&mut cfg.channel.n_taps, self.channel.n_taps);
        ov(&mut cfg.channel.pulse_rolloff, self.channel.pulse_rolloff);
        ov(
            &mut cfg.channel.gain_correlation,
            self.channel.gain_correlation,
        );
        ov(
            &mut cfg.channel.angular_rate_rad_per_slot,
            self.channel.angular_rate_rad_per_slot,
        );
        ov(
            &mut cfg.channel.ray_angle_spread_rad,
            self.channel.ray_angle_spread_rad,
        );
        ov(
            &mut cfg.channel.bs_to_ris_departure_rad,
            self.channel.bs_to_ris_departure_rad,
        );
        ov(
            &mut cfg.channel.bs_to_ris_arrival_rad,
            self.channel.bs_to_ris_arrival_rad,
        );
        ov(
            &mut cfg.channel.user_angle_base_rad,
            self.channel.user_angle_base_rad,
        );
        ov(
            &mut cfg.channel.user_angle_step_rad,
            self.channel.user_angle_step_rad,
        );
        ov(
            &mut cfg.channel.ris_user_angle_base_rad,
            self.channel.ris_user_angle_base_rad,
        );
        ov(
            &mut cfg.channel.ris_user_angle_step_rad,
            self.channel.ris_user_angle_step_rad,
        );

        ov(&mut cfg.learner.n_layers, self.learner.n_layers);
        ov(
            &mut cfg.learner.neurons_per_layer,
            self.learner.neurons_per_layer,
        );
        ov(&mut cfg.learner.connectivity, self.learner.connectivity);
        ov(&mut cfg.learner.spectral_radius, self.learner.spectral_radius);
        ov(
            &mut cfg.learner.rescale_spectral_radius,
            self.learner.rescale_spectral_radius,
        );
        ov(&mut cfg.learner.activation, self.learner.activation);
        ov(&mut cfg.learner.washout, self.learner.washout);
        ov(&mut cfg.learner.ridge_lambda, self.learner.ridge_lambda);

        ov(&mut cfg.ensemble.m1, self.ensemble.m1);
        ov(&mut cfg.ensemble.block_len, self.ensemble.block_len);
        ov(&mut cfg.ensemble.coverage, self.ensemble.coverage);

        ov(&mut cfg.schedule.t_slots, self.schedule.t_slots);
        ov(
            &mut cfg.schedule.slot_interval_s,
            self.schedule.slot_interval_s,
        );
        ov(
            &mut cfg.schedule.train_fraction,
            self.schedule.train_fraction,
        );
        ov(&mut cfg.schedule.horizon, self.schedule.horizon);

        ov(&mut cfg.sweeps.k_list, self.sweeps.k_list);
        ov(&mut cfg.sweeps.ris_sizes, self.sweeps.ris_sizes);
        ov(&mut cfg.sweeps.n_seeds, self.sweeps.n_seeds);
        ov(
            &mut cfg.sweeps.se_eval_horizon,
            self.sweeps.se_eval_horizon,
        );

        ov(&mut cfg.oracle.grid_b, self.oracle.grid_b);
        ov(&mut cfg.oracle.max_sweeps, self.oracle.max_sweeps);
        ov(
            &mut cfg.oracle.multistart_first_slot,
            self.oracle.multistart_first_slot,
        );
        ov(&mut cfg.oracle.warm_start, self.oracle.warm_start);

        ov(&mut cfg.task.source, self.task.source);
        ov(&mut cfg.task.task_seed, self.task.task_seed);
        ov(&mut cfg.task.amplitude_range, self.task.amplitude_range);
        ov(&mut cfg.task.omega_range, self.task.omega_range);
        ov(&mut cfg.task.trend_range, self.task.trend_range);

        ov(&mut cfg.report.epochs, self.report.epochs);
        ov(&mut cfg.report.batch_sizes, self.report.batch_sizes);
        ov(&mut cfg.report.element_index, self.report.element_index);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_both_profiles() {
        assert!(ExperimentConfig::defaults(Profile::Desk).validate().is_empty());
        assert!(ExperimentConfig::defaults(Profile::Paper).validate().is_empty());
    }

    #[test]
    fn paper_profile_uses_full_scale_dimensions() {
        let cfg = ExperimentConfig::defaults(Profile::Paper);
        assert_eq!(cfg.system.n_t, 256);
        assert_eq!(cfg.system.ris_m, 64);
        assert_eq!(cfg.system.k_users, 4);
        assert_eq!(cfg.system.s_subcarriers, 128);
        assert_eq!(cfg.ensemble.m1, 15);
        assert_eq!(cfg.schedule.t_slots, 100);
        assert_eq!(cfg.schedule.horizon, 50);
        assert!((cfg.schedule.train_fraction - 0.7).abs() < 1e-12);
    }

    #[test]
    fn overlay_applies_only_given_fields() {
        let mut cfg = ExperimentConfig::defaults(Profile::Desk);
        let partial: PartialConfig = toml::from_str(
            "seed = 7\n[system]\nn_t = 32\n[schedule]\nhorizon = 5\n",
        )
        .unwrap();
        partial.apply(&mut cfg);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.system.n_t, 32);
        assert_eq!(cfg.schedule.horizon, 5);
        assert_eq!(cfg.system.ris_m, 16); // untouched default
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let result: Result<PartialConfig, _> = toml::from_str("nonsense = 1\n");
        assert!(result.is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = ExperimentConfig::defaults(Profile::Desk);
        cfg.schedule.train_fraction = 1.0;
        cfg.schedule.horizon = 0;
        cfg.report.element_index = 99;
        cfg.system.k_users = 64;
        let errors = cfg.validate();
        assert!(errors.len() >= 4, "got {errors:?}");
    }

    #[test]
    fn config_toml_roundtrip_is_stable() {
        let cfg = ExperimentConfig::defaults(Profile::Desk);
        let s1 = cfg.to_toml();
        let parsed: ExperimentConfig = toml::from_str(&s1).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.to_toml(), s1);
    }
}

//! Clustered geometric wideband channel model.
//!
//! Each link (BS→RIS, BS→user, RIS→user) is a sum over clusters and rays of
//! complex gains, delay-tap pulse weights and ULA steering vectors; the tap
//! dimension is folded into a per-subcarrier frequency response. Generation
//! is a pure function of `(config, seed)` and slot evolution uses per-slot
//! derived streams so any scheduling order reproduces the same bytes.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::rng::{self, stream_rng, StreamTag};
use crate::scalar::Scalar;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Default raised-cosine roll-off for the pulse-shaping filter.
pub const DEFAULT_ROLLOFF: f64 = 0.3;

/// Half-width, in tap spacings, outside which the pulse is truncated to zero.
pub const PULSE_TRUNCATION_TAPS: usize = 16;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("subcarrier index {index} out of range (S = {s_count})")]
    SubcarrierOutOfRange { index: usize, s_count: usize },
    #[error("invalid channel configuration: {context}")]
    InvalidConfig { context: String },
}

/// Uniform linear array description: element count, spacing and the
/// per-subcarrier wavelengths that turn physical angles into spatial ones.
#[derive(Debug, Clone)]
pub struct ArrayGeometry<T> {
    n_elements: usize,
    element_spacing_b: T,
    wavelengths: Vec<T>,
}

impl<T: Scalar> ArrayGeometry<T> {
    pub fn new(
        n_elements: usize,
        element_spacing_b: T,
        wavelengths: Vec<T>,
    ) -> Result<Self, ChannelError> {
        if n_elements == 0 {
            return Err(ChannelError::InvalidConfig {
                context: "array needs at least one element".into(),
            });
        }
        if element_spacing_b <= T::zero() {
            return Err(ChannelError::InvalidConfig {
                context: "element spacing must be positive".into(),
            });
        }
        if wavelengths.is_empty() || wavelengths.iter().any(|w| *w <= T::zero()) {
            return Err(ChannelError::InvalidConfig {
                context: "wavelength list must be nonempty and positive".into(),
            });
        }
        Ok(Self {
            n_elements,
            element_spacing_b,
            wavelengths,
        })
    }

    /// Geometry for a band of `s_count` subcarriers centred on `carrier_hz`,
    /// with half-wavelength spacing at the carrier.
    pub fn for_band(
        n_elements: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
        s_count: usize,
    ) -> Result<Self, ChannelError> {
        if carrier_hz <= 0.0 || bandwidth_hz < 0.0 || s_count == 0 {
            return Err(ChannelError::InvalidConfig {
                context: "carrier must be positive and S >= 1".into(),
            });
        }
        let spacing_hz = bandwidth_hz / s_count as f64;
        let wavelengths = (0..s_count)
            .map(|s| {
                let f = carrier_hz + (s as f64 - (s_count as f64 - 1.0) / 2.0) * spacing_hz;
                T::from_f64_lossy(SPEED_OF_LIGHT_M_S / f)
            })
            .collect();
        let b = T::from_f64_lossy(SPEED_OF_LIGHT_M_S / carrier_hz / 2.0);
        Self::new(n_elements, b, wavelengths)
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn element_spacing(&self) -> T {
        self.element_spacing_b
    }

    pub fn n_subcarriers(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelength(&self, subcarrier: usize) -> Result<T, ChannelError> {
        self.wavelengths
            .get(subcarrier)
            .copied()
            .ok_or(ChannelError::SubcarrierOutOfRange {
                index: subcarrier,
                s_count: self.wavelengths.len(),
            })
    }
}

/// The complex path gains are always drawn CN(0, 1); the enum records that
/// contract where a configuration is serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainDistribution {
    #[default]
    ComplexGaussianUnit,
}

/// Cluster/ray structure and delay-tap discretization for one link.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub n_clusters: usize,
    pub n_rays_per_cluster: usize,
    /// Cluster delays are uniform in this interval (seconds).
    pub cluster_delay_range: (f64, f64),
    /// Per-ray delay offsets are uniform in this interval (seconds).
    pub ray_delay_offset_range: (f64, f64),
    pub gain_distribution: GainDistribution,
    /// Tap spacing `T` in `δ(dT − τ)` (seconds).
    pub cp_length_t: f64,
    pub n_delay_taps_d: usize,
    pub n_subcarriers_s: usize,
    pub pulse_rolloff: f64,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let fail = |context: &str| {
            Err(ChannelError::InvalidConfig {
                context: context.into(),
            })
        };
        if self.n_clusters >= 1 && self.n_rays_per_cluster == 0 {
            return fail("n_rays_per_cluster must be >= 1 when clusters exist");
        }
        if self.cluster_delay_range.0 > self.cluster_delay_range.1 {
            return fail("cluster delay interval is reversed");
        }
        if self.ray_delay_offset_range.0 > self.ray_delay_offset_range.1 {
            return fail("ray delay offset interval is reversed");
        }
        if self.cp_length_t <= 0.0 {
            return fail("tap spacing must be positive");
        }
        if self.n_delay_taps_d == 0 {
            return fail("need at least one delay tap");
        }
        if self.n_subcarriers_s == 0 {
            return fail("need at least one subcarrier");
        }
        if !(0.0..=1.0).contains(&self.pulse_rolloff) {
            return fail("pulse roll-off must lie in [0, 1]");
        }
        Ok(())
    }

    /// Three clusters of one ray each, delays U[0, 20] ns with ±0.1 ns ray
    /// offsets, 16 taps spaced 2 ns apart.
    pub fn defaults(n_subcarriers_s: usize) -> Self {
        Self {
            n_clusters: 3,
            n_rays_per_cluster: 1,
            cluster_delay_range: (0.0, 20e-9),
            ray_delay_offset_range: (-0.1e-9, 0.1e-9),
            gain_distribution: GainDistribution::ComplexGaussianUnit,
            cp_length_t: 2e-9,
            n_delay_taps_d: 16,
            n_subcarriers_s,
            pulse_rolloff: DEFAULT_ROLLOFF,
        }
    }
}

/// One multipath component of a link.
#[derive(Debug, Clone, Copy)]
pub struct Ray<T> {
    pub delay_s: f64,
    pub gain: Complex<T>,
    /// Angular offset added to the link's base angle at the "from" end.
    pub departure_offset_rad: T,
    /// Angular offset at the "to" end (used only by the dual-steered BS→RIS link).
    pub arrival_offset_rad: T,
}

/// Mean physical angles for every link plus the per-ray angular spread.
#[derive(Debug, Clone)]
pub struct LinkAngles<T> {
    /// Departure angle at the BS toward the RIS.
    pub bs_to_ris_departure: T,
    /// Arrival-side angle at the RIS (the model steers both ends of this link).
    pub bs_to_ris_arrival: T,
    /// Departure angle at the BS toward each user.
    pub bs_to_users: Vec<T>,
    /// Departure angle at the RIS toward each user.
    pub ris_to_users: Vec<T>,
    /// Half-width of the uniform per-ray angular offsets (radians).
    pub ray_angle_spread: T,
}

impl<T: Scalar> LinkAngles<T> {
    pub fn n_users(&self) -> usize {
        self.bs_to_users.len()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.bs_to_users.len() != self.ris_to_users.len() {
            return Err(ChannelError::InvalidConfig {
                context: format!(
                    "user angle lists disagree: {} BS-side vs {} RIS-side",
                    self.bs_to_users.len(),
                    self.ris_to_users.len()
                ),
            });
        }
        if self.bs_to_users.is_empty() {
            return Err(ChannelError::InvalidConfig {
                context: "at least one user required".into(),
            });
        }
        Ok(())
    }
}

/// Everything needed to generate one slot: cluster structure for the three
/// link families plus the two array geometries.
#[derive(Debug, Clone)]
pub struct ChannelParams<T> {
    pub ris_link: ClusterConfig,
    pub direct_link: ClusterConfig,
    pub reflect_link: ClusterConfig,
    pub bs: ArrayGeometry<T>,
    pub ris: ArrayGeometry<T>,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        self.ris_link.validate()?;
        self.direct_link.validate()?;
        self.reflect_link.validate()?;
        let s = self.ris_link.n_subcarriers_s;
        if self.direct_link.n_subcarriers_s != s || self.reflect_link.n_subcarriers_s != s {
            return Err(ChannelError::InvalidConfig {
                context: "subcarrier counts differ across links".into(),
            });
        }
        if self.bs.n_subcarriers() != s || self.ris.n_subcarriers() != s {
            return Err(ChannelError::InvalidConfig {
                context: format!(
                    "array geometries carry {} / {} wavelengths but S = {s}",
                    self.bs.n_subcarriers(),
                    self.ris.n_subcarriers()
                ),
            });
        }
        Ok(())
    }

    pub fn n_subcarriers(&self) -> usize {
        self.ris_link.n_subcarriers_s
    }
}

/// Per-subcarrier channel triple for one time slot.
#[derive(Debug, Clone)]
pub struct ChannelSet<T> {
    /// BS→RIS matrices, one M×N_t matrix per subcarrier.
    g: Vec<Array2<Complex<T>>>,
    /// Direct BS→user vectors, `[user][subcarrier]`, each of length N_t.
    h_d: Vec<Vec<Array1<Complex<T>>>>,
    /// RIS→user vectors, `[user][subcarrier]`, each of length M.
    h_r: Vec<Vec<Array1<Complex<T>>>>,
    seed: u64,
    slot: usize,
}

impl<T: Scalar> ChannelSet<T> {
    /// Builds a set from raw parts, validating shapes and finiteness.
    pub fn from_parts(
        g: Vec<Array2<Complex<T>>>,
        h_d: Vec<Vec<Array1<Complex<T>>>>,
        h_r: Vec<Vec<Array1<Complex<T>>>>,
        seed: u64,
        slot: usize,
    ) -> Result<Self, ChannelError> {
        if g.is_empty() || h_d.is_empty() || h_d.len() != h_r.len() {
            return Err(ChannelError::InvalidConfig {
                context: "channel set needs >= 1 subcarrier and consistent user lists".into(),
            });
        }
        let set = Self {
            g,
            h_d,
            h_r,
            seed,
            slot,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.g.len()
    }

    pub fn n_users(&self) -> usize {
        self.h_d.len()
    }

    pub fn n_tx(&self) -> usize {
        self.g[0].ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.g[0].nrows()
    }

    pub fn g(&self, subcarrier: usize) -> &Array2<Complex<T>> {
        &self.g[subcarrier]
    }

    pub fn h_d(&self, user: usize, subcarrier: usize) -> &Array1<Complex<T>> {
        &self.h_d[user][subcarrier]
    }

    pub fn h_r(&self, user: usize, subcarrier: usize) -> &Array1<Complex<T>> {
        &self.h_r[user][subcarrier]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Shape consistency and finiteness of every entry.
    pub fn validate(&self) -> Result<(), ChannelError> {
        let m = self.n_ris();
        let n_t = self.n_tx();
        let finite = |z: &Complex<T>| z.re.is_finite() && z.im.is_finite();
        for g in &self.g {
            if g.nrows() != m || g.ncols() != n_t || !g.iter().all(finite) {
                return Err(ChannelError::InvalidConfig {
                    context: "G matrices inconsistent or non-finite".into(),
                });
            }
        }
        for (vecs, len, name) in [(&self.h_d, n_t, "h_d"), (&self.h_r, m, "h_r")] {
            for per_user in vecs.iter() {
                if per_user.len() != self.g.len() {
                    return Err(ChannelError::InvalidConfig {
                        context: format!("{name} subcarrier count mismatch"),
                    });
                }
                for v in per_user {
                    if v.len() != len || !v.iter().all(finite) {
                        return Err(ChannelError::InvalidConfig {
                            context: format!("{name} inconsistent or non-finite"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// A clone with every direct-path vector zeroed (blocked LoS baseline).
    pub fn without_direct_link(&self) -> Self {
        let mut out = self.clone();
        for per_user in &mut out.h_d {
            for v in per_user {
                v.fill(Complex::new(T::zero(), T::zero()));
            }
        }
        out
    }
}

/// Steering vector of an N-element ULA at spatial angle `phi`:
/// element `i` is `exp(−j·2π·i·phi) / √N`.
pub fn steering<T: Scalar>(n: usize, phi: T) -> Array1<Complex<T>> {
    let scale = T::one() / T::from_usize(n).unwrap().sqrt();
    Array1::from_iter((0..n).map(|i| {
        let angle = -T::TAU() * T::from_usize(i).unwrap() * phi;
        Complex::from_polar(scale, angle)
    }))
}

/// ULA response for a physical angle: `phi = (b/λ[s])·sin(θ)`.
pub fn array_response<T: Scalar>(
    geometry: &ArrayGeometry<T>,
    physical_angle_rad: T,
    subcarrier: usize,
) -> Result<Array1<Complex<T>>, ChannelError> {
    let lambda = geometry.wavelength(subcarrier)?;
    let phi = geometry.element_spacing() / lambda * physical_angle_rad.sin();
    Ok(steering(geometry.n_elements(), phi))
}

/// Peak-normalized raised-cosine pulse with the default roll-off, truncated
/// to [`PULSE_TRUNCATION_TAPS`] tap spacings either side of its peak.
pub fn pulse_shape<T: Scalar>(t: T, cp_length_t: T) -> T {
    pulse_shape_windowed(t, cp_length_t, DEFAULT_ROLLOFF, PULSE_TRUNCATION_TAPS)
}

/// Raised-cosine pulse with explicit roll-off and truncation window.
pub fn pulse_shape_windowed<T: Scalar>(
    t: T,
    cp_length_t: T,
    rolloff: f64,
    window_taps: usize,
) -> T {
    assert!(cp_length_t > T::zero(), "tap spacing must be positive");
    let x = t / cp_length_t;
    if x.abs() > T::from_usize(window_taps).unwrap() {
        return T::zero();
    }
    let beta = T::from_f64_lossy(rolloff);
    if x == T::zero() {
        return T::one();
    }
    let two = T::from_f64_lossy(2.0);
    let denom = T::one() - (two * beta * x) * (two * beta * x);
    let eps = T::from_f64_lossy(1e-8);
    if denom.abs() < eps {
        // limit at x = ±1/(2β): (β/2)·sin(π/(2β))
        return beta / two * (T::PI() / (two * beta)).sin();
    }
    let sinc = (T::PI() * x).sin() / (T::PI() * x);
    sinc * (T::PI() * beta * x).cos() / denom
}

/// Draws the multipath components of one link: per cluster a delay, per ray
/// a delay offset, a CN(0,1) gain and angular offsets at both ends.
pub fn sample_link_rays<T: Scalar>(
    cfg: &ClusterConfig,
    angle_spread: T,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Ray<T>> {
    let spread = angle_spread.to_f64_lossy();
    let mut rays = Vec::with_capacity(cfg.n_clusters * cfg.n_rays_per_cluster);
    for _ in 0..cfg.n_clusters {
        let cluster_delay =
            rng::uniform::<f64>(rng, cfg.cluster_delay_range.0, cfg.cluster_delay_range.1);
        for _ in 0..cfg.n_rays_per_cluster {
            let offset = rng::uniform::<f64>(
                rng,
                cfg.ray_delay_offset_range.0,
                cfg.ray_delay_offset_range.1,
            );
            let gain = rng::complex_normal::<T>(rng);
            let departure = if spread > 0.0 {
                rng::uniform::<T>(rng, -spread, spread)
            } else {
                T::zero()
            };
            let arrival = if spread > 0.0 {
                rng::uniform::<T>(rng, -spread, spread)
            } else {
                T::zero()
            };
            rays.push(Ray {
                delay_s: cluster_delay + offset,
                gain,
                departure_offset_rad: departure,
                arrival_offset_rad: arrival,
            });
        }
    }
    rays
}

/// Folds the delay taps of one ray into its per-subcarrier complex weight:
/// `c[s] = α · Σ_d δ(dT − τ) · exp(−j2πds/S)`.
fn ray_subcarrier_weights<T: Scalar>(cfg: &ClusterConfig, ray: &Ray<T>) -> Vec<Complex<T>> {
    let s_count = cfg.n_subcarriers_s;
    let mut weights = vec![Complex::new(T::zero(), T::zero()); s_count];
    for d in 0..cfg.n_delay_taps_d {
        let t = d as f64 * cfg.cp_length_t - ray.delay_s;
        let p = pulse_shape_windowed::<f64>(
            t,
            cfg.cp_length_t,
            cfg.pulse_rolloff,
            PULSE_TRUNCATION_TAPS,
        );
        if p == 0.0 {
            continue;
        }
        let pulse = T::from_f64_lossy(p);
        for (s, w) in weights.iter_mut().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (d as f64) * (s as f64) / (s_count as f64);
            *w += Complex::from_polar(pulse, T::from_f64_lossy(angle)) * ray.gain;
        }
    }
    weights
}

fn assemble_g<T: Scalar>(
    cfg: &ClusterConfig,
    bs: &ArrayGeometry<T>,
    ris: &ArrayGeometry<T>,
    bs_angle: T,
    ris_angle: T,
    rays: &[Ray<T>],
) -> Vec<Array2<Complex<T>>> {
    let s_count = cfg.n_subcarriers_s;
    let mut g: Vec<Array2<Complex<T>>> = (0..s_count)
        .map(|_| Array2::zeros((ris.n_elements(), bs.n_elements())))
        .collect();
    for ray in rays {
        let weights = ray_subcarrier_weights(cfg, ray);
        for (s, gs) in g.iter_mut().enumerate() {
            let a_ris = array_response(ris, ris_angle + ray.arrival_offset_rad, s)
                .expect("validated subcarrier");
            let a_bs = array_response(bs, bs_angle + ray.departure_offset_rad, s)
                .expect("validated subcarrier");
            let w = weights[s];
            for (i, ri) in a_ris.iter().enumerate() {
                for (j, bj) in a_bs.iter().enumerate() {
                    gs[[i, j]] += w * ri * bj.conj();
                }
            }
        }
    }
    g
}

fn assemble_vector_link<T: Scalar>(
    cfg: &ClusterConfig,
    geometry: &ArrayGeometry<T>,
    base_angle: T,
    rays: &[Ray<T>],
) -> Vec<Array1<Complex<T>>> {
    let s_count = cfg.n_subcarriers_s;
    let mut h: Vec<Array1<Complex<T>>> = (0..s_count)
        .map(|_| Array1::zeros(geometry.n_elements()))
        .collect();
    for ray in rays {
        let weights = ray_subcarrier_weights(cfg, ray);
        for (s, hs) in h.iter_mut().enumerate() {
            let a = array_response(geometry, base_angle + ray.departure_offset_rad, s)
                .expect("validated subcarrier");
            let w = weights[s];
            hs.zip_mut_with(&a, |acc, ai| *acc += w * *ai);
        }
    }
    h
}

/// Multipath draws for every link of one scene, reusable across slots.
#[derive(Debug, Clone)]
pub struct SceneRays<T> {
    pub ris_link: Vec<Ray<T>>,
    pub direct: Vec<Vec<Ray<T>>>,
    pub reflect: Vec<Vec<Ray<T>>>,
}

fn draw_scene_rays<T: Scalar>(
    params: &ChannelParams<T>,
    angles: &LinkAngles<T>,
    seed: u64,
) -> SceneRays<T> {
    let spread = angles.ray_angle_spread;
    let k = angles.n_users();
    let mut g_rng = stream_rng(seed, StreamTag::RisChannel, 0);
    let ris_link = sample_link_rays(&params.ris_link, spread, &mut g_rng);
    let direct = (0..k)
        .map(|u| {
            let mut r = stream_rng(seed, StreamTag::DirectChannel, u as u64);
            sample_link_rays(&params.direct_link, spread, &mut r)
        })
        .collect();
    let reflect = (0..k)
        .map(|u| {
            let mut r = stream_rng(seed, StreamTag::ReflectChannel, u as u64);
            sample_link_rays(&params.reflect_link, spread, &mut r)
        })
        .collect();
    SceneRays {
        ris_link,
        direct,
        reflect,
    }
}

fn assemble_channel_set<T: Scalar>(
    params: &ChannelParams<T>,
    angles: &LinkAngles<T>,
    rays: &SceneRays<T>,
    seed: u64,
    slot: usize,
) -> ChannelSet<T> {
    let g = assemble_g(
        &params.ris_link,
        &params.bs,
        &params.ris,
        angles.bs_to_ris_departure,
        angles.bs_to_ris_arrival,
        &rays.ris_link,
    );
    let h_d = angles
        .bs_to_users
        .iter()
        .zip(&rays.direct)
        .map(|(&a, r)| assemble_vector_link(&params.direct_link, &params.bs, a, r))
        .collect();
    let h_r = angles
        .ris_to_users
        .iter()
        .zip(&rays.reflect)
        .map(|(&a, r)| assemble_vector_link(&params.reflect_link, &params.ris, a, r))
        .collect();
    ChannelSet {
        g,
        h_d,
        h_r,
        seed,
        slot,
    }
}

/// One static channel realization; deterministic in `(params, angles, seed)`.
pub fn generate_channel_set<T: Scalar>(
    params: &ChannelParams<T>,
    angles: &LinkAngles<T>,
    seed: u64,
) -> Result<ChannelSet<T>, ChannelError> {
    params.validate()?;
    angles.validate()?;
    let rays = draw_scene_rays(params, angles, seed);
    let set = assemble_channel_set(params, angles, &rays, seed, 0);
    set.validate()?;
    Ok(set)
}

/// Slot-by-slot scene dynamics: user-link angles drift at a constant rate
/// while ray gains follow a first-order Gauss-Markov process that keeps the
/// CN(0,1) marginals.
#[derive(Debug, Clone)]
pub struct MobilityModel<T> {
    pub initial_angles: LinkAngles<T>,
    /// Radians per slot added to both BS→user and RIS→user angles.
    pub angular_rate: T,
    pub slot_interval_s: f64,
    pub n_slots: usize,
    /// Gauss-Markov gain correlation per slot; 1.0 freezes the gains.
    pub gain_correlation: f64,
}

impl<T: Scalar> MobilityModel<T> {
    pub fn new(initial_angles: LinkAngles<T>, angular_rate: T, n_slots: usize) -> Self {
        Self {
            initial_angles,
            angular_rate,
            slot_interval_s: 1.0,
            n_slots,
            gain_correlation: 0.99,
        }
    }

    fn angles_at(&self, slot: usize) -> LinkAngles<T> {
        let drift = self.angular_rate * T::from_usize(slot).unwrap();
        let mut angles = self.initial_angles.clone();
        for a in &mut angles.bs_to_users {
            *a = *a + drift;
        }
        for a in &mut angles.ris_to_users {
            *a = *a + drift;
        }
        angles
    }
}

fn evolve_gains<T: Scalar>(rays: &mut SceneRays<T>, rho: f64, seed: u64, slot: usize) {
    let rho_t = T::from_f64_lossy(rho);
    let innov = T::from_f64_lossy((1.0 - rho * rho).max(0.0).sqrt());
    let mut rng = stream_rng(seed, StreamTag::SlotInnovation, slot as u64);
    let mut step = |ray: &mut Ray<T>| {
        let xi = rng::complex_normal::<T>(&mut rng);
        ray.gain = ray.gain * rho_t + xi * innov;
    };
    for ray in &mut rays.ris_link {
        step(ray);
    }
    for per_user in &mut rays.direct {
        for ray in per_user {
            step(ray);
        }
    }
    for per_user in &mut rays.reflect {
        for ray in per_user {
            step(ray);
        }
    }
}

/// Generates the full slot sequence of a mobile scene.
///
/// Slot 0 equals [`generate_channel_set`] for the initial angles; later slots
/// advance the user-link angles and evolve the ray gains.
pub fn evolve_trajectory<T: Scalar>(
    params: &ChannelParams<T>,
    mobility: &MobilityModel<T>,
    seed: u64,
) -> Result<Vec<ChannelSet<T>>, ChannelError> {
    if mobility.n_slots == 0 {
        return Err(ChannelError::InvalidConfig {
            context: "trajectory needs at least one slot".into(),
        });
    }
    if !(0.0..=1.0).contains(&mobility.gain_correlation) {
        return Err(ChannelError::InvalidConfig {
            context: "gain correlation must lie in [0, 1]".into(),
        });
    }
    params.validate()?;
    mobility.initial_angles.validate()?;

    let mut rays = draw_scene_rays(params, &mobility.initial_angles, seed);
    let mut slots = Vec::with_capacity(mobility.n_slots);
    for t in 0..mobility.n_slots {
        if t > 0 {
            evolve_gains(&mut rays, mobility.gain_correlation, seed, t);
        }
        let angles = mobility.angles_at(t);
        let set = assemble_channel_set(params, &angles, &rays, seed, t);
        set.validate()?;
        slots.push(set);
    }
    Ok(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat_geometry(n: usize, s: usize) -> ArrayGeometry<f64> {
        // b = λ so the spatial angle equals sin(θ) exactly.
        ArrayGeometry::new(n, 1.0, vec![1.0; s]).unwrap()
    }

    fn test_params(n_t: usize, m: usize, s: usize) -> ChannelParams<f64> {
        let mut cfg = ClusterConfig::defaults(s);
        cfg.n_clusters = 3;
        ChannelParams {
            ris_link: cfg.clone(),
            direct_link: cfg.clone(),
            reflect_link: cfg,
            bs: ArrayGeometry::for_band(n_t, 100e9, 10e9, s).unwrap(),
            ris: ArrayGeometry::for_band(m, 100e9, 10e9, s).unwrap(),
        }
    }

    fn test_angles(k: usize) -> LinkAngles<f64> {
        LinkAngles {
            bs_to_ris_departure: 0.4,
            bs_to_ris_arrival: -0.7,
            bs_to_users: (0..k).map(|u| 0.1 + 0.5 * u as f64).collect(),
            ris_to_users: (0..k).map(|u| -0.3 + 0.4 * u as f64).collect(),
            ray_angle_spread: 0.1,
        }
    }

    #[test]
    fn steering_zero_angle_is_all_ones() {
        let v = steering::<f64>(4, 0.0);
        for z in v.iter() {
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_half_cycle_alternates_sign() {
        let v = steering::<f64>(2, 0.5);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v[0].re, inv_sqrt2, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1].re, -inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn array_response_uses_wavelength_scaling() {
        // b/λ = 1 and θ = asin(0.5) gives φ = 0.5.
        let geom = flat_geometry(2, 1);
        let v = array_response(&geom, 0.5f64.asin(), 0).unwrap();
        assert_abs_diff_eq!(v[1].re, -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn array_response_rejects_bad_subcarrier() {
        let geom = flat_geometry(2, 3);
        assert!(matches!(
            array_response(&geom, 0.1, 3),
            Err(ChannelError::SubcarrierOutOfRange {
                index: 3,
                s_count: 3
            })
        ));
    }

    #[test]
    fn pulse_is_peak_normalized_even_and_truncated() {
        let spacing = 2e-9;
        assert_eq!(pulse_shape(0.0, spacing), 1.0);
        let t = 0.7e-9;
        assert_abs_diff_eq!(
            pulse_shape(t, spacing),
            pulse_shape(-t, spacing),
            epsilon = 0.0
        );
        let far = (PULSE_TRUNCATION_TAPS as f64 + 1.0) * spacing;
        assert_eq!(pulse_shape(far, spacing), 0.0);
    }

    #[test]
    fn pulse_singularity_uses_limit() {
        // x = 1/(2β) with β = 0.3: denominator vanishes.
        let spacing = 1.0;
        let x = 1.0 / (2.0 * DEFAULT_ROLLOFF);
        let v = pulse_shape(x * spacing, spacing);
        let expected =
            DEFAULT_ROLLOFF / 2.0 * (std::f64::consts::PI / (2.0 * DEFAULT_ROLLOFF)).sin();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-6);
        assert!(v.is_finite());
    }

    #[test]
    fn zero_clusters_gives_zero_channels() {
        let mut params = test_params(4, 3, 2);
        params.ris_link.n_clusters = 0;
        params.direct_link.n_clusters = 0;
        params.reflect_link.n_clusters = 0;
        let set = generate_channel_set(&params, &test_angles(2), 9).unwrap();
        for s in 0..2 {
            assert!(set.g(s).iter().all(|z| z.norm() == 0.0));
            for k in 0..2 {
                assert!(set.h_d(k, s).iter().all(|z| z.norm() == 0.0));
                assert!(set.h_r(k, s).iter().all(|z| z.norm() == 0.0));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let params = test_params(4, 3, 2);
        let a = generate_channel_set(&params, &test_angles(2), 1234).unwrap();
        let b = generate_channel_set(&params, &test_angles(2), 1234).unwrap();
        for s in 0..2 {
            assert_eq!(a.g(s), b.g(s));
            for k in 0..2 {
                assert_eq!(a.h_d(k, s), b.h_d(k, s));
                assert_eq!(a.h_r(k, s), b.h_r(k, s));
            }
        }
    }

    #[test]
    fn gain_second_moment_matches_unit_variance() {
        // Monte Carlo over seeds: E Σ|α|² = N_cl·N_ray = 3.
        let cfg = ClusterConfig::defaults(1);
        let n = 10_000;
        let mut total = 0.0;
        for seed in 0..n {
            let mut rng = stream_rng(seed, StreamTag::RisChannel, 0);
            let rays = sample_link_rays::<f64>(&cfg, 0.1, &mut rng);
            total += rays.iter().map(|r| r.gain.norm_sqr()).sum::<f64>();
        }
        let mean = total / n as f64;
        assert!(
            (mean - 3.0).abs() < 0.15,
            "mean gain power {mean} not within 5% of 3"
        );
    }

    #[test]
    fn static_scene_repeats_identically() {
        let params = test_params(4, 3, 2);
        let mut mobility = MobilityModel::new(test_angles(2), 0.0, 4);
        mobility.gain_correlation = 1.0;
        let slots = evolve_trajectory(&params, &mobility, 7).unwrap();
        for t in 1..4 {
            for s in 0..2 {
                assert_eq!(slots[0].g(s), slots[t].g(s));
            }
        }
    }

    #[test]
    fn single_slot_trajectory_matches_static_generation() {
        let params = test_params(4, 3, 2);
        let mobility = MobilityModel::new(test_angles(2), 0.01, 1);
        let slots = evolve_trajectory(&params, &mobility, 21).unwrap();
        let single = generate_channel_set(&params, &test_angles(2), 21).unwrap();
        for s in 0..2 {
            assert_eq!(slots[0].g(s), single.g(s));
        }
    }

    #[test]
    fn slow_evolution_is_smooth() {
        let params = test_params(4, 4, 2);
        let mobility = MobilityModel::new(test_angles(2), 1e-3, 20);
        let slots = evolve_trajectory(&params, &mobility, 3).unwrap();
        let mut max_step = 0.0_f64;
        let mut scale = 0.0_f64;
        for t in 1..slots.len() {
            for s in 0..2 {
                let diff = slots[t].g(s) - slots[t - 1].g(s);
                let d = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let g_norm = slots[t]
                    .g(s)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                max_step = max_step.max(d);
                scale = scale.max(g_norm);
            }
        }
        // Seeded smoothness baseline: with ρ = 0.99 and 1 mrad/slot the
        // relative per-slot movement stays far below the channel scale.
        assert!(
            max_step < 0.35 * scale,
            "per-slot Frobenius step {max_step} vs scale {scale}"
        );
    }

    #[test]
    fn direct_channel_is_independent_of_ris_size() {
        let angles = test_angles(2);
        let small = generate_channel_set(&test_params(4, 4, 2), &angles, 5).unwrap();
        let large = generate_channel_set(&test_params(4, 9, 2), &angles, 5).unwrap();
        for k in 0..2 {
            for s in 0..2 {
                assert_eq!(small.h_d(k, s), large.h_d(k, s));
            }
        }
    }

    proptest! {
        #[test]
        fn steering_is_unit_norm(n in 1usize..32, phi in -2.0f64..2.0) {
            let v = steering::<f64>(n, phi);
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

//! Effective channels through the surface, zero-forcing precoding, sum
//! spectral efficiency, and the ground-truth phase optimizers.
//!
//! The received gain for user k on subcarrier s is `h_effᴴ·w_k[s]` with
//! `h_effᴴ = h_dᴴ + h_rᴴ·Θ·G`, the dimension-consistent composition of the
//! direct and reflected paths.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::linalg::{hermitian_eigen, LinalgError};
use crate::phase::wrap_to_2pi;
use crate::scalar::Scalar;

/// Relative singular-value cutoff for the pseudo-inverse fallback.
const SVD_TRUNCATION_TOL: f64 = 1e-12;

/// Relative improvement below which a coordinate sweep stops.
const SWEEP_IMPROVEMENT_TOL: f64 = 1e-6;

/// Brute-force search guard: at most this many grid points.
const EXHAUSTIVE_GUARD: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("zero-forcing needs K <= N_t, got K = {k}, N_t = {n_t}")]
    InfeasibleZf { k: usize, n_t: usize },
    #[error("grid must have at least two phases, got {grid_b}")]
    GridTooSmall { grid_b: usize },
    #[error("search space {size} exceeds the exhaustive guard of {limit} points")]
    SearchSpaceTooLarge { size: u64, limit: u64 },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

/// Per-element reflection state of the surface: phases in `[0, 2π)` and
/// amplitudes in `[0, 1]`; `Θ = diag(β_m·exp(j·φ_m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig<T> {
    phases: Array1<T>,
    amplitudes: Array1<T>,
}

impl<T: Scalar> PhaseConfig<T> {
    /// Unit amplitudes; phases are wrapped into `[0, 2π)`.
    pub fn from_phases(phases: Array1<T>) -> Self {
        let phases = phases.mapv(wrap_to_2pi);
        let amplitudes = Array1::from_elem(phases.len(), T::one());
        Self { phases, amplitudes }
    }

    pub fn with_amplitudes(phases: Array1<T>, amplitudes: Array1<T>) -> Result<Self, LinkError> {
        if phases.len() != amplitudes.len() {
            return Err(LinkError::DimensionMismatch {
                context: format!(
                    "{} phases vs {} amplitudes",
                    phases.len(),
                    amplitudes.len()
                ),
            });
        }
        if amplitudes.iter().any(|b| *b < T::zero() || *b > T::one()) {
            return Err(LinkError::DimensionMismatch {
                context: "amplitudes must lie in [0, 1]".into(),
            });
        }
        Ok(Self {
            phases: phases.mapv(wrap_to_2pi),
            amplitudes,
        })
    }

    /// All phases zero, amplitudes one.
    pub fn zero(m: usize) -> Self {
        Self::from_phases(Array1::zeros(m))
    }

    /// Fully absorbing surface (β = 0): removes the reflected path.
    pub fn absorbing(m: usize) -> Self {
        Self {
            phases: Array1::zeros(m),
            amplitudes: Array1::zeros(m),
        }
    }

    /// Uniform random phases in `[0, 2π)`, unit amplitudes.
    pub fn uniform_random(m: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let phases = Array1::from_iter(
            (0..m).map(|_| crate::rng::uniform::<T>(rng, 0.0, std::f64::consts::TAU)),
        );
        Self::from_phases(phases)
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &Array1<T> {
        &self.phases
    }

    pub fn amplitudes(&self) -> &Array1<T> {
        &self.amplitudes
    }

    pub fn set_phase(&mut self, element: usize, phase: T) {
        self.phases[element] = wrap_to_2pi(phase);
    }

    /// Reflection coefficient `θ_m = β_m·e^{jφ_m}`.
    pub fn theta(&self, element: usize) -> Complex<T> {
        Complex::from_polar(self.amplitudes[element], self.phases[element])
    }
}

/// Per-subcarrier transmit beamformers with unit-norm columns.
#[derive(Debug, Clone)]
pub struct Precoder<T> {
    /// One N_t×K matrix per subcarrier; column k serves user k.
    w: Vec<Array2<Complex<T>>>,
    power_p: T,
    noise_variance: T,
    rank_deficient: bool,
}

impl<T: Scalar> Precoder<T> {
    pub fn w(&self, subcarrier: usize) -> &Array2<Complex<T>> {
        &self.w[subcarrier]
    }

    pub fn power(&self) -> T {
        self.power_p
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    /// True when any subcarrier needed the truncated pseudo-inverse.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn column(&self, subcarrier: usize, user: usize) -> Array1<Complex<T>> {
        self.w[subcarrier].column(user).to_owned()
    }

    #[cfg(test)]
    pub(crate) fn w_mut(&mut self) -> &mut Vec<Array2<Complex<T>>> {
        &mut self.w
    }
}

fn check_dims<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    user: usize,
    subcarrier: usize,
) -> Result<(), LinkError> {
    if theta.len() != ch.n_ris() {
        return Err(LinkError::DimensionMismatch {
            context: format!(
                "phase config has {} elements, channel has {}",
                theta.len(),
                ch.n_ris()
            ),
        });
    }
    if user >= ch.n_users() {
        return Err(LinkError::DimensionMismatch {
            context: format!("user {user} out of range (K = {})", ch.n_users()),
        });
    }
    if subcarrier >= ch.n_subcarriers() {
        return Err(LinkError::DimensionMismatch {
            context: format!(
                "subcarrier {subcarrier} out of range (S = {})",
                ch.n_subcarriers()
            ),
        });
    }
    Ok(())
}

/// Row vector `h_effᴴ = h_dᴴ + h_rᴴ·Θ·G` for one user and subcarrier.
fn effective_row<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    user: usize,
    subcarrier: usize,
) -> Array1<Complex<T>> {
    let g = ch.g(subcarrier);
    let h_d = ch.h_d(user, subcarrier);
    let h_r = ch.h_r(user, subcarrier);
    let mut row = h_d.mapv(|z| z.conj());
    for m in 0..ch.n_ris() {
        let factor = h_r[m].conj() * theta.theta(m);
        if factor.norm_sqr() == T::zero() {
            continue;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r += factor * g[[m, j]];
        }
    }
    row
}

/// Effective downlink channel `h_eff` (length N_t); the received scalar gain
/// is `h_effᴴ·w_k[s]`.
pub fn effective_channel<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    user: usize,
    subcarrier: usize,
) -> Result<Array1<Complex<T>>, LinkError> {
    check_dims(ch, theta, user, subcarrier)?;
    Ok(effective_row(ch, theta, user, subcarrier).mapv(|z| z.conj()))
}

/// Post-beamforming SNR `γ_k[s] = (P/σ²)·|h_effᴴ·w_k[s]|²`.
///
/// Inter-user terms are absent by construction; pair this with the
/// zero-forcing precoder (see [`sinr_with_interference`] otherwise).
pub fn sinr<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    precoder: &Precoder<T>,
    user: usize,
    subcarrier: usize,
) -> Result<T, LinkError> {
    check_dims(ch, theta, user, subcarrier)?;
    let row = effective_row(ch, theta, user, subcarrier);
    let w = &precoder.w[subcarrier];
    let gain = row
        .iter()
        .zip(w.column(user))
        .fold(Complex::new(T::zero(), T::zero()), |acc, (r, wk)| {
            acc + *r * *wk
        });
    Ok(precoder.power_p / precoder.noise_variance * gain.norm_sqr())
}

/// Diagnostic SINR that keeps the inter-user terms, for non-nulling precoders:
/// `γ = P·|h_effᴴw_k|² / (σ² + P·Σ_{j≠k}|h_effᴴw_j|²)`.
pub fn sinr_with_interference<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    precoder: &Precoder<T>,
    user: usize,
    subcarrier: usize,
) -> Result<T, LinkError> {
    check_dims(ch, theta, user, subcarrier)?;
    let row = effective_row(ch, theta, user, subcarrier);
    let w = &precoder.w[subcarrier];
    let mut signal = T::zero();
    let mut interference = T::zero();
    for j in 0..ch.n_users() {
        let gain = row
            .iter()
            .zip(w.column(j))
            .fold(Complex::new(T::zero(), T::zero()), |acc, (r, wj)| {
                acc + *r * *wj
            })
            .norm_sqr();
        if j == user {
            signal = gain;
        } else {
            interference += gain;
        }
    }
    Ok(precoder.power_p * signal / (precoder.noise_variance + precoder.power_p * interference))
}

/// Sum spectral efficiency `Σ_k Σ_s ln(1 + γ_k[s])` in nats/s/Hz.
pub fn spectral_efficiency<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    precoder: &Precoder<T>,
) -> Result<T, LinkError> {
    let mut total = T::zero();
    for k in 0..ch.n_users() {
        for s in 0..ch.n_subcarriers() {
            let gamma = sinr(ch, theta, precoder, k, s)?;
            total += (T::one() + gamma).ln();
        }
    }
    Ok(total)
}

/// Zero-forcing precoder `W[s] = Hᴴ(HHᴴ)⁻¹` with unit-norm columns, where
/// row k of `H` is the effective row `h_eff,kᴴ`.
///
/// A rank-deficient `H` falls back to a truncated pseudo-inverse (singular
/// values below `1e-12·σ_max` dropped) and marks the precoder.
pub fn zf_precoder<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    power_p: T,
) -> Result<Precoder<T>, LinkError> {
    zf_precoder_with_noise(ch, theta, power_p, T::one())
}

pub fn zf_precoder_with_noise<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    power_p: T,
    noise_variance: T,
) -> Result<Precoder<T>, LinkError> {
    let k_users = ch.n_users();
    let n_t = ch.n_tx();
    if k_users > n_t {
        return Err(LinkError::InfeasibleZf { k: k_users, n_t });
    }
    check_dims(ch, theta, 0, 0)?;

    let mut w_all = Vec::with_capacity(ch.n_subcarriers());
    let mut rank_deficient = false;
    for s in 0..ch.n_subcarriers() {
        let rows: Vec<Array1<Complex<T>>> = (0..k_users)
            .map(|k| effective_row(ch, theta, k, s))
            .collect();

        // Gram matrix H·Hᴴ (K×K, Hermitian PSD).
        let mut gram = Array2::<Complex<T>>::zeros((k_users, k_users));
        for i in 0..k_users {
            for j in 0..k_users {
                let mut acc = Complex::new(T::zero(), T::zero());
                for t in 0..n_t {
                    acc += rows[i][t] * rows[j][t].conj();
                }
                gram[[i, j]] = acc;
            }
        }

        let eig = hermitian_eigen(&gram)?;
        let max_ev = eig
            .values
            .iter()
            .fold(T::zero(), |acc, &v| if v > acc { v } else { acc });
        // σ_i = √λ_i; truncate σ_i < tol·σ_max, i.e. λ_i < tol²·λ_max.
        let cutoff = max_ev * T::from_f64_lossy(SVD_TRUNCATION_TOL * SVD_TRUNCATION_TOL);
        let kept: Vec<usize> = (0..k_users)
            .filter(|&i| eig.values[i] > cutoff && eig.values[i] > T::zero())
            .collect();
        if kept.len() < k_users {
            rank_deficient = true;
            log::warn!(
                "zf_precoder: rank-deficient effective channel on subcarrier {s} \
                 ({}/{} singular values kept)",
                kept.len(),
                k_users
            );
        }

        // (HHᴴ)⁻¹ ≈ U·D⁺·Uᴴ over the kept spectrum.
        let mut inv_gram = Array2::<Complex<T>>::zeros((k_users, k_users));
        for &e in &kept {
            let inv = T::one() / eig.values[e];
            for i in 0..k_users {
                for j in 0..k_users {
                    inv_gram[[i, j]] += eig.vectors[[i, e]]
                        * eig.vectors[[j, e]].conj()
                        * Complex::new(inv, T::zero());
                }
            }
        }

        // W = Hᴴ·(HHᴴ)⁻¹, column by column.
        let mut w = Array2::<Complex<T>>::zeros((n_t, k_users));
        for k in 0..k_users {
            for t in 0..n_t {
                let mut acc = Complex::new(T::zero(), T::zero());
                for i in 0..k_users {
                    acc += rows[i][t].conj() * inv_gram[[i, k]];
                }
                w[[t, k]] = acc;
            }
        }

        // Unit-norm columns; a fully vanished column (zero channel) gets a
        // deterministic basis vector so the norm invariant still holds.
        for k in 0..k_users {
            let norm = w.column(k).iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if norm > T::zero() {
                let inv = T::one() / norm;
                for t in 0..n_t {
                    w[[t, k]] = w[[t, k]] * inv;
                }
            } else {
                rank_deficient = true;
                w[[k % n_t, k]] = Complex::new(T::one(), T::zero());
            }
        }
        w_all.push(w);
    }

    Ok(Precoder {
        w: w_all,
        power_p,
        noise_variance,
        rank_deficient,
    })
}

/// Spectral efficiency of a configuration under its own ZF precoder.
pub fn se_for<T: Scalar>(
    ch: &ChannelSet<T>,
    theta: &PhaseConfig<T>,
    power_p: T,
) -> Result<T, LinkError> {
    let precoder = zf_precoder(ch, theta, power_p)?;
    spectral_efficiency(ch, theta, &precoder)
}

fn grid_phase<T: Scalar>(b: usize, grid_b: usize) -> T {
    T::TAU() * T::from_usize(b).unwrap() / T::from_usize(grid_b).unwrap()
}

/// Coordinate-ascent phase optimizer over a `grid_b`-point phase grid.
///
/// Sweeps the elements in order, testing every grid phase with the others
/// held fixed and keeping strict improvements only (lowest grid index wins
/// ties), so the returned SE never falls below the initial configuration's.
/// Stops when a full sweep improves SE by less than a relative 1e-6 or after
/// `max_sweeps`.
pub fn oracle_optimize_theta<T: Scalar>(
    ch: &ChannelSet<T>,
    power_p: T,
    grid_b: usize,
    max_sweeps: usize,
    init: Option<&PhaseConfig<T>>,
) -> Result<PhaseConfig<T>, LinkError> {
    if grid_b < 2 {
        return Err(LinkError::GridTooSmall { grid_b });
    }
    let m = ch.n_ris();
    let mut current = match init {
        Some(cfg) => {
            check_dims(ch, cfg, 0, 0)?;
            cfg.clone()
        }
        None => PhaseConfig::zero(m),
    };
    let mut current_se = se_for(ch, &current, power_p)?;

    for _ in 0..max_sweeps {
        let sweep_start_se = current_se;
        for elem in 0..m {
            let original = current.phases()[elem];
            let mut best_phase = original;
            let mut best_se = current_se;
            for b in 0..grid_b {
                let cand = grid_phase::<T>(b, grid_b);
                current.set_phase(elem, cand);
                let se = se_for(ch, &current, power_p)?;
                if se > best_se {
                    best_se = se;
                    best_phase = cand;
                }
            }
            current.set_phase(elem, best_phase);
            current_se = best_se;
        }
        let improvement = current_se - sweep_start_se;
        let scale = if sweep_start_se > T::zero() {
            sweep_start_se
        } else {
            T::one()
        };
        if improvement <= T::from_f64_lossy(SWEEP_IMPROVEMENT_TOL) * scale {
            break;
        }
    }
    Ok(current)
}

/// Coordinate ascent restarted from each of the `grid_b` uniform phase
/// configurations; returns the best run (lowest start index wins ties).
pub fn oracle_optimize_multistart<T: Scalar>(
    ch: &ChannelSet<T>,
    power_p: T,
    grid_b: usize,
    max_sweeps: usize,
) -> Result<PhaseConfig<T>, LinkError> {
    if grid_b < 2 {
        return Err(LinkError::GridTooSmall { grid_b });
    }
    let m = ch.n_ris();
    let mut best: Option<(T, PhaseConfig<T>)> = None;
    for b in 0..grid_b {
        let init = PhaseConfig::from_phases(Array1::from_elem(m, grid_phase::<T>(b, grid_b)));
        let cfg = oracle_optimize_theta(ch, power_p, grid_b, max_sweeps, Some(&init))?;
        let se = se_for(ch, &cfg, power_p)?;
        match &best {
            Some((best_se, _)) if se <= *best_se => {}
            _ => best = Some((se, cfg)),
        }
    }
    Ok(best.expect("grid_b >= 2").1)
}

/// Global grid argmax by brute force over all `grid_b^M` configurations.
///
/// Ties keep the first configuration in lexicographic grid order. Guarded
/// to at most 10⁷ points.
pub fn exhaustive_theta<T: Scalar>(
    ch: &ChannelSet<T>,
    power_p: T,
    grid_b: usize,
) -> Result<PhaseConfig<T>, LinkError> {
    if grid_b < 2 {
        return Err(LinkError::GridTooSmall { grid_b });
    }
    let m = ch.n_ris();
    let size = (grid_b as u64)
        .checked_pow(m as u32)
        .filter(|&n| n <= EXHAUSTIVE_GUARD)
        .ok_or(LinkError::SearchSpaceTooLarge {
            size: u64::MAX,
            limit: EXHAUSTIVE_GUARD,
        })?;

    let mut indices = vec![0usize; m];
    let mut best_cfg = PhaseConfig::zero(m);
    let mut best_se = None::<T>;
    for _ in 0..size {
        let cfg = PhaseConfig::from_phases(Array1::from_iter(
            indices.iter().map(|&b| grid_phase::<T>(b, grid_b)),
        ));
        let se = se_for(ch, &cfg, power_p)?;
        if best_se.map_or(true, |b| se > b) {
            best_se = Some(se);
            best_cfg = cfg;
        }
        // lexicographic odometer: last element fastest
        for pos in (0..m).rev() {
            indices[pos] += 1;
            if indices[pos] < grid_b {
                break;
            }
            indices[pos] = 0;
        }
    }
    Ok(best_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        generate_channel_set, ArrayGeometry, ChannelParams, ChannelSet, ClusterConfig, LinkAngles,
    };
    use crate::rng::{stream_rng, StreamTag};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;

    fn params(n_t: usize, m: usize, s: usize) -> ChannelParams<f64> {
        let cfg = ClusterConfig::defaults(s);
        ChannelParams {
            ris_link: cfg.clone(),
            direct_link: cfg.clone(),
            reflect_link: cfg,
            bs: ArrayGeometry::for_band(n_t, 100e9, 10e9, s).unwrap(),
            ris: ArrayGeometry::for_band(m, 100e9, 10e9, s).unwrap(),
        }
    }

    fn angles(k: usize) -> LinkAngles<f64> {
        LinkAngles {
            bs_to_ris_departure: 0.35,
            bs_to_ris_arrival: -0.6,
            bs_to_users: (0..k).map(|u| 0.15 + 0.45 * u as f64).collect(),
            ris_to_users: (0..k).map(|u| -0.25 + 0.4 * u as f64).collect(),
            ray_angle_spread: 0.1,
        }
    }

    fn channel(n_t: usize, m: usize, s: usize, k: usize, seed: u64) -> ChannelSet<f64> {
        generate_channel_set(&params(n_t, m, s), &angles(k), seed).unwrap()
    }

    /// Hand-built single-subcarrier, single-user channel.
    fn manual_channel(
        g: Array2<Complex<f64>>,
        h_d: Array1<Complex<f64>>,
        h_r: Array1<Complex<f64>>,
    ) -> ChannelSet<f64> {
        ChannelSet::from_parts(vec![g], vec![vec![h_d]], vec![vec![h_r]], 0, 0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn absorbing_surface_leaves_direct_path() {
        let ch = channel(4, 3, 2, 1, 3);
        let theta = PhaseConfig::absorbing(3);
        let h_eff = effective_channel(&ch, &theta, 0, 1).unwrap();
        let expected = ch.h_d(0, 1);
        for (a, b) in h_eff.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_channels_give_zero_effective() {
        let g = Array2::zeros((2, 3));
        let h_d = Array1::zeros(3);
        let h_r = array![c(1.0, 0.0), c(0.0, 1.0)];
        let ch = manual_channel(g, h_d, h_r);
        let h_eff = effective_channel(&ch, &PhaseConfig::zero(2), 0, 0).unwrap();
        assert!(h_eff.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn effective_channel_matches_hand_computation() {
        // M = 2, N_t = 1, all phases zero:
        // h_effᴴ = conj(h_d) + Σ_m conj(h_r[m])·G[m,0]
        let g = array![[c(1.0, 1.0)], [c(0.5, -0.5)]];
        let h_d = array![c(2.0, 1.0)];
        let h_r = array![c(1.0, 0.0), c(0.0, 1.0)];
        let ch = manual_channel(g.clone(), h_d.clone(), h_r.clone());
        let h_eff = effective_channel(&ch, &PhaseConfig::zero(2), 0, 0).unwrap();

        let row = h_d[0].conj() + h_r[0].conj() * g[[0, 0]] + h_r[1].conj() * g[[1, 0]];
        // returned vector is the conjugate of the row
        assert_abs_diff_eq!(h_eff[0].re, row.re, epsilon = 1e-15);
        assert_abs_diff_eq!(h_eff[0].im, -row.im, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ch = channel(4, 3, 2, 1, 3);
        assert!(matches!(
            effective_channel(&ch, &PhaseConfig::zero(5), 0, 0),
            Err(LinkError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            effective_channel(&ch, &PhaseConfig::zero(3), 1, 0),
            Err(LinkError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sinr_scalar_evaluation_and_linearity() {
        // Direct-only channel with |h_effᴴw|² = 4, P = 2, σ² = 1 → γ = 8.
        let g = Array2::zeros((1, 1));
        let h_d = array![c(2.0, 0.0)];
        let h_r = array![c(0.0, 0.0)];
        let ch = manual_channel(g, h_d, h_r);
        let theta = PhaseConfig::zero(1);
        let pre = zf_precoder(&ch, &theta, 2.0).unwrap();
        let gamma = sinr(&ch, &theta, &pre, 0, 0).unwrap();
        assert_relative_eq!(gamma, 8.0, max_relative = 1e-12);

        let pre2 = zf_precoder(&ch, &theta, 4.0).unwrap();
        let gamma2 = sinr(&ch, &theta, &pre2, 0, 0).unwrap();
        assert_relative_eq!(gamma2, 2.0 * gamma, max_relative = 1e-12);
    }

    #[test]
    fn sinr_vanishes_for_orthogonal_beam() {
        let ch = manual_channel(
            Array2::zeros((1, 2)),
            array![c(1.0, 0.0), c(0.0, 0.0)],
            array![c(0.0, 0.0)],
        );
        let theta = PhaseConfig::zero(1);
        let mut pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        // overwrite with a beam orthogonal to h_eff = e_0
        pre.w_mut()[0] = array![[c(0.0, 0.0)], [c(1.0, 0.0)]];
        assert_eq!(sinr(&ch, &theta, &pre, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn se_is_zero_when_gammas_vanish_and_matches_ln() {
        let g = Array2::zeros((1, 1));
        let ch = manual_channel(g, array![c(0.0, 0.0)], array![c(0.0, 0.0)]);
        let theta = PhaseConfig::zero(1);
        let pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        assert_eq!(spectral_efficiency(&ch, &theta, &pre).unwrap(), 0.0);

        // K = 1, S = 1, γ = e − 1 → SE = 1
        let ch = manual_channel(
            Array2::zeros((1, 1)),
            array![c((std::f64::consts::E - 1.0).sqrt(), 0.0)],
            array![c(0.0, 0.0)],
        );
        let pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        let se = spectral_efficiency(&ch, &theta, &pre).unwrap();
        assert_relative_eq!(se, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zf_single_user_is_matched_filter() {
        let ch = channel(4, 3, 2, 1, 11);
        let theta = PhaseConfig::zero(3);
        let pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        for s in 0..2 {
            let h_eff = effective_channel(&ch, &theta, 0, s).unwrap();
            let norm: f64 = h_eff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let w = pre.column(s, 0);
            let wnorm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert_relative_eq!(wnorm, 1.0, max_relative = 1e-12);
            // |h_effᴴ·w| = ‖h_eff‖ iff w is the matched-filter direction
            let inner = h_eff
                .iter()
                .zip(w.iter())
                .fold(c(0.0, 0.0), |acc, (h, w)| acc + h.conj() * *w)
                .norm();
            assert_relative_eq!(inner, norm, max_relative = 1e-9);
        }
    }

    #[test]
    fn zf_nulls_inter_user_terms() {
        let ch = channel(8, 4, 2, 4, 17);
        let theta = PhaseConfig::zero(4);
        let pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        assert!(!pre.rank_deficient());
        let mut worst: f64 = 0.0;
        for s in 0..2 {
            for k in 0..4 {
                let row = effective_row(&ch, &theta, k, s);
                let own = row
                    .iter()
                    .zip(pre.w(s).column(k))
                    .fold(c(0.0, 0.0), |acc, (r, w)| acc + *r * *w)
                    .norm();
                for j in 0..4 {
                    if j == k {
                        continue;
                    }
                    let cross = row
                        .iter()
                        .zip(pre.w(s).column(j))
                        .fold(c(0.0, 0.0), |acc, (r, w)| acc + *r * *w)
                        .norm();
                    worst = worst.max(cross / own);
                }
            }
        }
        assert!(worst < 1e-9, "max cross/own ratio {worst}");
    }

    #[test]
    fn zf_orthogonal_rows_give_conjugate_columns() {
        // Orthogonal direct-only channels: columns come out as scaled
        // conjugates of the rows.
        let g = Array2::zeros((1, 2));
        let ch = ChannelSet::from_parts(
            vec![g],
            vec![
                vec![array![c(2.0, 0.0), c(0.0, 0.0)]],
                vec![array![c(0.0, 0.0), c(0.0, 3.0)]],
            ],
            vec![vec![array![c(0.0, 0.0)]], vec![array![c(0.0, 0.0)]]],
            0,
            0,
        )
        .unwrap();
        let theta = PhaseConfig::zero(1);
        let pre = zf_precoder(&ch, &theta, 1.0).unwrap();
        let w0 = pre.column(0, 0);
        assert_relative_eq!(w0[0].re, 1.0, max_relative = 1e-12);
        assert!(w0[1].norm() < 1e-12);
        let w1 = pre.column(0, 1);
        assert_relative_eq!(w1[1].im, 1.0, max_relative = 1e-12);
        assert!(w1[0].norm() < 1e-12);
    }

    #[test]
    fn zf_rejects_more_users_than_antennas() {
        let ch = channel(2, 3, 1, 3, 1);
        assert!(matches!(
            zf_precoder(&ch, &PhaseConfig::zero(3), 1.0),
            Err(LinkError::InfeasibleZf { k: 3, n_t: 2 })
        ));
    }

    #[test]
    fn zf_pseudo_inverse_fallback_flags_rank_deficiency() {
        // Two users with identical channels: H has rank 1.
        let h = array![c(1.0, 0.5), c(-0.5, 1.0)];
        let ch = ChannelSet::from_parts(
            vec![Array2::zeros((1, 2))],
            vec![vec![h.clone()], vec![h]],
            vec![vec![array![c(0.0, 0.0)]], vec![array![c(0.0, 0.0)]]],
            0,
            0,
        )
        .unwrap();
        let pre = zf_precoder(&ch, &PhaseConfig::zero(1), 1.0).unwrap();
        assert!(pre.rank_deficient());
        for k in 0..2 {
            let n: f64 = pre
                .column(0, k)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert_relative_eq!(n, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn se_invariant_to_global_precoder_rotation() {
        let ch = channel(4, 3, 2, 2, 23);
        let theta = PhaseConfig::zero(3);
        let pre = zf_precoder(&ch, &theta, 5.0).unwrap();
        let se = spectral_efficiency(&ch, &theta, &pre).unwrap();
        let rot = Complex::from_polar(1.0, 1.234);
        let mut rotated = pre.clone();
        for w in rotated.w_mut() {
            w.mapv_inplace(|z| z * rot);
        }
        let se_rot = spectral_efficiency(&ch, &theta, &rotated).unwrap();
        assert_relative_eq!(se, se_rot, max_relative = 1e-12);
    }

    #[test]
    fn oracle_single_element_matches_closed_form_alignment() {
        // M = 1, K = 1, S = 1, N_t = 1: align the reflected path with the
        // direct one. With h_effᴴ = conj(h_d) + conj(h_r)·e^{jφ}·g the
        // optimum is φ* = arg(h_r) − arg(h_d) − arg(g).
        let g0 = c(0.8, 0.6);
        let h_d0 = c(1.0, -2.0);
        let h_r0 = c(-0.3, 0.9);
        let ch = manual_channel(array![[g0]], array![h_d0], array![h_r0]);
        let grid_b = 64;
        let cfg = oracle_optimize_theta(&ch, 1.0, grid_b, 50, None).unwrap();
        let expected = wrap_to_2pi(h_r0.arg() - h_d0.arg() - g0.arg());
        let diff = crate::phase::angular_diff(cfg.phases()[0], expected).abs();
        assert!(
            diff <= std::f64::consts::PI / grid_b as f64 + 1e-12,
            "phase {} vs closed form {expected}",
            cfg.phases()[0]
        );
        // and the aligned phase is the continuous argmax: fine-scan check
        let se_opt = se_for(&ch, &cfg, 1.0).unwrap();
        for b in 0..512 {
            let phi = std::f64::consts::TAU * b as f64 / 512.0;
            let se = se_for(&ch, &PhaseConfig::from_phases(array![phi]), 1.0).unwrap();
            assert!(se <= se_opt + 1e-6, "scan found better SE at {phi}");
        }
    }

    #[test]
    fn oracle_fixed_point_at_grid_optimum() {
        let ch = channel(4, 3, 2, 1, 31);
        let first = oracle_optimize_theta(&ch, 1.0, 8, 50, None).unwrap();
        let again = oracle_optimize_theta(&ch, 1.0, 8, 50, Some(&first)).unwrap();
        assert_eq!(first.phases(), again.phases());
    }

    #[test]
    fn oracle_matches_exhaustive_on_small_instance() {
        let ch = channel(3, 4, 2, 1, 41);
        let ca = oracle_optimize_multistart(&ch, 1.0, 8, 60).unwrap();
        let ex = exhaustive_theta(&ch, 1.0, 8).unwrap();
        let se_ca = se_for(&ch, &ca, 1.0).unwrap();
        let se_ex = se_for(&ch, &ex, 1.0).unwrap();
        assert!(
            (se_ca - se_ex).abs() <= 1e-9,
            "coordinate ascent {se_ca} vs exhaustive {se_ex}"
        );
    }

    #[test]
    fn oracle_never_worse_than_its_start() {
        for seed in 0..5 {
            let ch = channel(4, 3, 2, 2, 100 + seed);
            let mut rng = stream_rng(seed, StreamTag::RandomReflection, 0);
            let start = PhaseConfig::uniform_random(3, &mut rng);
            let se_start = se_for(&ch, &start, 1.0).unwrap();
            let out = oracle_optimize_theta(&ch, 1.0, 8, 40, Some(&start)).unwrap();
            let se_out = se_for(&ch, &out, 1.0).unwrap();
            assert!(se_out >= se_start);
            assert!(se_start >= 0.0);
        }
    }

    #[test]
    fn exhaustive_all_zero_channel_returns_first_lexicographic() {
        let ch = manual_channel(
            Array2::zeros((2, 1)),
            array![c(0.0, 0.0)],
            array![c(0.0, 0.0), c(0.0, 0.0)],
        );
        let cfg = exhaustive_theta(&ch, 1.0, 4).unwrap();
        assert!(cfg.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn exhaustive_beats_random_sampling_on_its_grid() {
        let ch = channel(3, 3, 1, 1, 77);
        let grid_b = 4usize;
        let best = exhaustive_theta(&ch, 1.0, grid_b).unwrap();
        let se_best = se_for(&ch, &best, 1.0).unwrap();
        let step = std::f64::consts::TAU / grid_b as f64;
        let mut rng = stream_rng(7, StreamTag::RandomReflection, 1);
        for _ in 0..100 {
            let cand = PhaseConfig::uniform_random(3, &mut rng);
            // snap the random draw onto the searched grid
            let snapped =
                PhaseConfig::from_phases(cand.phases().mapv(|p: f64| (p / step).round() * step));
            assert!(se_for(&ch, &snapped, 1.0).unwrap() <= se_best + 1e-9);
        }
    }

    #[test]
    fn exhaustive_guard_rejects_large_spaces() {
        let ch = channel(2, 16, 1, 1, 1);
        assert!(matches!(
            exhaustive_theta(&ch, 1.0, 8),
            Err(LinkError::SearchSpaceTooLarge { .. })
        ));
    }
}

//! Deterministic seed derivation.
//!
//! Every stochastic stage derives its own stream from a master seed plus a
//! role tag, so per-slot or per-learner work can be scheduled in any order
//! (or in parallel) without changing a single drawn value.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// Stream tags keep unrelated draws out of each other's way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    RisChannel,
    DirectChannel,
    ReflectChannel,
    SlotInnovation,
    ReservoirInput,
    ReservoirInternal,
    Bootstrap,
    Learner,
    SyntheticTask,
    RandomReflection,
    Experiment,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::RisChannel => 0x01,
            StreamTag::DirectChannel => 0x02,
            StreamTag::ReflectChannel => 0x03,
            StreamTag::SlotInnovation => 0x04,
            StreamTag::ReservoirInput => 0x05,
            StreamTag::ReservoirInternal => 0x06,
            StreamTag::Bootstrap => 0x07,
            StreamTag::Learner => 0x08,
            StreamTag::SyntheticTask => 0x09,
            StreamTag::RandomReflection => 0x0a,
            StreamTag::Experiment => 0x0b,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: StreamTag, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ tag.code().wrapping_mul(0xa076_1d64_78bd_642f)) ^ index)
}

/// RNG for a derived stream.
pub fn stream_rng(master: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

/// Standard-normal draw widened through `f64` so the stream is identical for
/// every scalar type.
pub fn normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::from_f64_lossy(x)
}

/// Uniform draw from `[lo, hi)` through `f64`; a degenerate range yields
/// its endpoint without consuming randomness.
pub fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> T {
    if hi <= lo {
        return T::from_f64_lossy(lo);
    }
    T::from_f64_lossy(rng.random_range(lo..hi))
}

/// Circularly-symmetric complex Gaussian with unit total variance,
/// CN(0, 1): real and imaginary parts are N(0, 1/2).
pub fn complex_normal<T: Scalar>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(T::from_f64_lossy(re * scale), T::from_f64_lossy(im * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, StreamTag::RisChannel, 0);
        let b = derive_seed(42, StreamTag::RisChannel, 0);
        assert_eq!(a, b);
        assert_ne!(a, derive_seed(42, StreamTag::RisChannel, 1));
        assert_ne!(a, derive_seed(42, StreamTag::DirectChannel, 0));
        assert_ne!(a, derive_seed(43, StreamTag::RisChannel, 0));
    }

    #[test]
    fn complex_normal_has_unit_power() {
        let mut rng = stream_rng(1, StreamTag::SlotInnovation, 0);
        let n = 200_000;
        let mean_power: f64 = (0..n)
            .map(|_| complex_normal::<f64>(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean_power - 1.0).abs() < 0.02, "power {mean_power}");
    }

    #[test]
    fn draws_match_across_scalar_types() {
        let mut r1 = stream_rng(5, StreamTag::Learner, 3);
        let mut r2 = stream_rng(5, StreamTag::Learner, 3);
        for _ in 0..10 {
            let a: f64 = normal(&mut r1);
            let b: f32 = normal(&mut r2);
            assert_eq!(a as f32, b);
        }
    }
}

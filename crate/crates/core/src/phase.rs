//! Angle arithmetic shared by the channel, predictor and metrics modules.
//!
//! Phases live on the circle; every difference taken anywhere in this crate
//! goes through [`wrap_to_pi`] so that 0 and 2π compare equal.

use crate::scalar::Scalar;

/// Maps an angle into `[0, 2π)`.
pub fn wrap_to_2pi<T: Scalar>(angle: T) -> T {
    let two_pi = T::TAU();
    let wrapped = angle % two_pi;
    let wrapped = if wrapped < T::zero() {
        wrapped + two_pi
    } else {
        wrapped
    };
    // `x % 2π + 2π` can round up to exactly 2π for tiny negative x.
    if wrapped >= two_pi {
        T::zero()
    } else {
        wrapped
    }
}

/// Maps an angle difference into `(−π, π]`.
pub fn wrap_to_pi<T: Scalar>(angle: T) -> T {
    let wrapped = wrap_to_2pi(angle);
    if wrapped > T::PI() {
        wrapped - T::TAU()
    } else {
        wrapped
    }
}

/// Smallest signed angular difference `a − b`, in `(−π, π]`.
pub fn angular_diff<T: Scalar>(a: T, b: T) -> T {
    wrap_to_pi(a - b)
}

/// Circular mean of a set of angles, in `[0, 2π)`.
///
/// Returns `None` when the resultant vector vanishes (antipodal tie), in
/// which case no direction is preferred.
pub fn circular_mean<T: Scalar>(angles: &[T]) -> Option<T> {
    let mut sum_cos = T::zero();
    let mut sum_sin = T::zero();
    for &a in angles {
        sum_cos += a.cos();
        sum_sin += a.sin();
    }
    let norm = (sum_cos * sum_cos + sum_sin * sum_sin).sqrt();
    if norm <= T::from_f64_lossy(1e-12) * T::from_usize(angles.len().max(1)).unwrap() {
        return None;
    }
    Some(wrap_to_2pi(sum_sin.atan2(sum_cos)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_2pi_basics() {
        assert_abs_diff_eq!(wrap_to_2pi(7.0_f64), 7.0 - std::f64::consts::TAU);
        assert_eq!(wrap_to_2pi(0.0_f64), 0.0);
        assert_eq!(wrap_to_2pi(std::f64::consts::TAU), 0.0);
        assert!(wrap_to_2pi(-1e-300_f64) < std::f64::consts::TAU);
    }

    #[test]
    fn wrap_pi_boundary_is_half_open() {
        assert_abs_diff_eq!(wrap_to_pi(std::f64::consts::PI), std::f64::consts::PI);
        assert!(wrap_to_pi(-std::f64::consts::PI) > 0.0);
    }

    #[test]
    fn circular_mean_of_quadrant_pair() {
        let mean = circular_mean(&[0.0_f64, std::f64::consts::FRAC_PI_2]).unwrap();
        assert_abs_diff_eq!(mean, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn circular_mean_antipodal_tie_is_none() {
        assert!(circular_mean(&[0.0_f64, std::f64::consts::PI]).is_none());
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(x in -1e6f64..1e6f64) {
            let w = wrap_to_2pi(x);
            prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
            prop_assert!((wrap_to_2pi(w) - w).abs() < 1e-9);
            let d = wrap_to_pi(x);
            prop_assert!(d > -std::f64::consts::PI && d <= std::f64::consts::PI);
        }
    }
}

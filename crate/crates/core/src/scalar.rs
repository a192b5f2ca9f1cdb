//! Scalar abstraction for the numeric core.
//!
//! Every module in this crate is generic over [`Scalar`], so the same code
//! runs in `f32` or `f64`. Concrete aliases for the common types live at the
//! crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
///
/// Random draws are always performed in `f64` and converted, so two models
/// built from the same seed share one underlying random stream regardless of
/// the scalar type.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, panicking only for non-finite inputs that
    /// the target type cannot represent (never the case for f32/f64).
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("f64 value not representable in scalar type")
    }

    /// Widening conversion to `f64` for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(x: f64) -> f64 {
        T::from_f64_lossy(x).to_f64_lossy()
    }

    #[test]
    fn conversions_roundtrip_for_both_widths() {
        assert_eq!(roundtrip::<f64>(1.25), 1.25);
        assert_eq!(roundtrip::<f32>(1.25), 1.25);
    }
}

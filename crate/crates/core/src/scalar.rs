//! Storage scalar abstraction.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type used to store vector components and dictionary
/// elements. Arithmetic that reduces over many terms goes through `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Widen to the accumulator type.
    fn to_acc(self) -> f64;
    /// Narrow from the accumulator type, rounding to nearest.
    fn from_acc(v: f64) -> Self;
    /// Exact conversion from the on-disk component type.
    fn from_stored(v: f32) -> Self;
    /// Conversion to the on-disk component type.
    fn to_f32_lossy(self) -> f32;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline(always)]
            fn to_acc(self) -> f64 {
                self as f64
            }
            #[inline(always)]
            fn from_acc(v: f64) -> Self {
                v as $t
            }
            #[inline(always)]
            fn from_stored(v: f32) -> Self {
                v as $t
            }
            #[inline(always)]
            fn to_f32_lossy(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

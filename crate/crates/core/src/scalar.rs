//! Numeric traits the rest of the crate is generic over.
//!
//! Two independent axes exist: link weights ([`Weight`]) used by the graph
//! algorithms, and sensor values ([`Scalar`]) carried in payloads and folded by
//! the engines. Concrete aliases for the common choices live at the crate root.

use std::fmt::Debug;
use std::ops::Add;

use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

/// A nonnegative additive link weight.
///
/// Integer weights compare exactly. Floating weights treat values within a
/// relative tolerance of `1e-9` as equal, so that sums like `0.1 + 0.2` tie
/// with `0.3` when breaking ties between equal-cost paths.
pub trait Weight: Copy + PartialOrd + Zero + Add<Output = Self> + ToPrimitive + Debug {
    fn approx_eq(self, other: Self) -> bool {
        self == other
    }

    /// Strictly less, modulo [`Weight::approx_eq`].
    fn definitely_lt(self, other: Self) -> bool {
        self < other && !self.approx_eq(other)
    }
}

macro_rules! exact_weight {
    ($($t:ty),*) => { $(impl Weight for $t {})* };
}

exact_weight!(u32, u64, i32, i64, usize);

macro_rules! float_weight {
    ($($t:ty),*) => {
        $(impl Weight for $t {
            fn approx_eq(self, other: Self) -> bool {
                let scale = self.abs().max(other.abs()).max(1.0);
                (self - other).abs() <= 1e-9 * scale
            }
        })*
    };
}

float_weight!(f32, f64);

/// A sensor value type: anything with field arithmetic, a partial order and
/// conversions to and from machine numbers.
///
/// Implemented for `f32`, `f64` and exact rationals such as
/// [`num_rational::BigRational`].
pub trait Scalar: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + Debug {}

impl<T> Scalar for T where T: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + Debug {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_ties_absorb_rounding() {
        assert!((0.1f64 + 0.2).approx_eq(0.3));
        assert!(!(0.1f64 + 0.2).definitely_lt(0.3));
        assert!(1.0f64.definitely_lt(1.001));
    }

    #[test]
    fn integer_weights_are_exact() {
        assert!(3u32.approx_eq(3));
        assert!(!3u32.approx_eq(4));
        assert!(3u32.definitely_lt(4));
    }
}

//! Scalar abstraction for the probability / information-theory kernel.
//!
//! All core math is generic over [`Real`] so that the same code runs in
//! `f32` or `f64`. The crate root exports `f64` aliases for every public
//! type; everything above the kernel (search, simulation, CLI) uses those.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the probability kernel.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for tolerances and literals.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant must convert to scalar")
    }

    /// Row-sum tolerance for stochastic matrices.
    fn row_sum_tol() -> Self {
        Self::from_f64_lossy(1e-9)
    }

    /// Entries in `(-entry_clamp_tol, 0)` are clamped to zero at construction.
    fn entry_clamp_tol() -> Self {
        Self::from_f64_lossy(1e-12)
    }

    /// Probabilities below this are treated as exact zeros inside logarithms.
    fn prob_floor() -> Self {
        Self::from_f64_lossy(1e-15)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// `p * log2(p)` with the convention `0 log 0 = 0`.
pub fn plog2p<F: Real>(p: F) -> F {
    if p <= F::prob_floor() {
        F::zero()
    } else {
        p * p.log2()
    }
}

/// Binary entropy in bits.
pub fn binary_entropy<F: Real>(p: F) -> F {
    -(plog2p(p) + plog2p(F::one() - p))
}

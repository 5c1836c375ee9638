//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that needs square roots, factorizations or eigenvalues is
//! written against [`Real`]. The purely additive transforms (cumulation,
//! shrinkage) only ask for ring operations, so they also accept exact
//! rational scalars.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by every module of the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display {
    /// Converts an `f64` literal or parameter into this scalar.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 converts to every Real")
    }

    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize converts to every Real")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("every Real converts to f64")
    }

    /// Unit roundoff of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Sums a slice by recursive halving. The result depends only on the order
/// of `values`, never on how the caller produced them.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

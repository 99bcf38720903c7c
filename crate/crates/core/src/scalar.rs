//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used for coordinates, weights and potentials.
///
/// Implemented for `f32` and `f64`. Everything that is stored on disk is
/// written as `f64` regardless of the working precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or config value.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw in `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    #[inline]
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    #[inline]
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

/// `log(sum(exp(x_i)))` over an indexable family. Returns `-inf` for an empty family.
#[inline]
pub fn logsumexp_by<T: Real>(len: usize, mut f: impl FnMut(usize) -> T) -> T {
    let mut max = T::neg_infinity();
    for i in 0..len {
        max = max.max(f(i));
    }
    if !max.is_finite() {
        return max;
    }
    let mut acc = T::zero();
    for i in 0..len {
        acc += (f(i) - max).exp();
    }
    max + acc.ln()
}

#[inline]
pub fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.1f64, -2.0, 3.5, 1.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp_by(xs.len(), |i| xs[i]) - naive).abs() < 1e-14);
        assert_eq!(logsumexp_by::<f64>(0, |_| 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn logsumexp_survives_large_magnitudes() {
        let xs = [-1000.0f64, -1001.0];
        let v = logsumexp_by(2, |i| xs[i]);
        assert!((v - (-1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
    }
}

//! Scalar abstraction: f32 or f64.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the library is generic over.
///
/// Everything numeric in this crate is written against this trait so the
/// same code runs in f32 or f64. The f64 aliases at the crate root are what
/// most callers want; f32 trades accuracy for memory and does not meet the
/// tight tolerances some routines are tested at in f64.
pub trait Scalar:
    num_traits::Float
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 conversion")
    }

    fn from_usize(v: usize) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("usize conversion")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }

    /// One standard-normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw on [0, 1).
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Euler's number.
    fn e() -> Self {
        Self::from_f64(std::f64::consts::E)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::from_f64(0.5)
    }

    fn pi() -> Self {
        Self::from_f64(std::f64::consts::PI)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

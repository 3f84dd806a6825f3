//! Floating point scalar used by the continuous parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// f32 or f64.
///
/// Everything that integrates, normalizes or exponentiates is generic over
/// this trait. Payoffs stay integral and are lifted with [`Real::from_i64`].
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance used when checking that a vector lies on the simplex or a
    /// matrix row sums to one.
    const STOCHASTIC_TOL: Self;

    /// Short name written to output metadata.
    const NAME: &'static str;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_int(x: i64) -> Self {
        Self::from_i64(x).expect("integer representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const STOCHASTIC_TOL: Self = 1e-12;
    const NAME: &'static str = "f64";
}

impl Real for f32 {
    const STOCHASTIC_TOL: Self = 1e-5;
    const NAME: &'static str = "f32";
}

/// Neumaier summation with error-free products.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        CompensatedSum { sum: T::zero(), carry: T::zero() }
    }
}

impl<T: Real> CompensatedSum<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    /// Adds `a * b` including the rounding error of the product.
    pub fn add_product(&mut self, a: T, b: T) {
        let p = a * b;
        self.add(p);
        self.add(a.mul_add(b, -p));
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

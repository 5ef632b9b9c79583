//! Scalar types usable for annealing temperatures and deluge levels.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::Num;

/// A number that can hold a fitness-derived level.
///
/// Implemented for `f32`, `f64` and exact `Ratio<i64>`.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Display + Send + Sync {
    fn from_fitness(fitness: u32) -> Self;

    fn from_count(n: usize) -> Self;

    fn to_f64(self) -> f64;
}

macro_rules! float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn from_fitness(fitness: u32) -> Self {
                fitness as $t
            }

            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    )*};
}

float_scalar!(f32, f64);

impl Scalar for Ratio<i64> {
    fn from_fitness(fitness: u32) -> Self {
        Ratio::from_integer(i64::from(fitness))
    }

    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

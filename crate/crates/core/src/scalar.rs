//! Floating-point abstraction used throughout the crate.
//!
//! All mission math (reward propagation, flow optimization, oracles) is
//! generic over [`Scalar`] so the same code runs in `f32` or `f64`. The
//! crate root exports `f64`-backed aliases, which is what the CLI and the
//! testbed defaults use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
where
    StandardNormal: Distribution<Self>,
{
    /// Lift an `f64` constant (tolerances, config defaults) into `Self`.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("constant representable in scalar type")
    }

    /// Lossy conversion used for reporting and CSV output.
    fn to_report(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Feasibility tolerance for flow constraints.
pub fn feas_eps<T: Scalar>() -> T {
    T::from_config(1e-6)
}

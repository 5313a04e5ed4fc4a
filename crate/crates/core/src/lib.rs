//! Exact hole probabilities, exact samplers and extreme-gap statistics for
//! the circular and Gaussian unitary ensembles.
//!
//! The analytic layer ([`kernels`], the scalar parts of [`holeprob`] and
//! [`rescaling`]) is generic over [`Real`], so it runs in `f32` or `f64`.
//! Everything that touches complex Gram matrices, random streams or
//! statistics works in `f64`; the aliases below name the `f64` instances.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod holeprob;
pub mod kernels;
pub mod linalg;
pub mod opchecks;
pub mod quad;
pub mod rescaling;
pub mod samplers;
pub mod stats;

mod bigfloat;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};

/// Scalar type accepted by the generic analytic routines.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits every Real")
    }

    /// Converts a count or index.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type HoleResult = holeprob::HoleResult<f64>;
pub type RescaleParams = rescaling::RescaleParams<f64>;
pub type BulkInterval = rescaling::BulkInterval<f64>;
pub type GumbelLaw = rescaling::GumbelLaw<f64>;

pub type HoleResult32 = holeprob::HoleResult<f32>;
pub type RescaleParams32 = rescaling::RescaleParams<f32>;
pub type BulkInterval32 = rescaling::BulkInterval<f32>;
pub type GumbelLaw32 = rescaling::GumbelLaw<f32>;

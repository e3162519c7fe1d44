//! Bistable reaction-diffusion fronts in axisymmetric funnel domains.
//!
//! The crate solves `u_t = Δu + f(u)` in domains made of a half-cylinder of
//! radius `R` glued to a cone of half-angle `α`. It provides the planar
//! traveling front, the funnel geometry with a body-fitted grid, an IMEX time
//! integrator, the entire solution emanating from a planar front, run
//! classification and level-set tracking, and the elliptic machinery used to
//! certify blocking.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases below fix the scalar to `f64`, which is what the tolerances in the
//! test suite are calibrated for.

// `!(x > 0)` also rejects NaN, which `x <= 0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// stencil loops index several arrays by the same node
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod entire;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod kinetics;
mod linear;
pub mod numerics;
pub mod snapshot;
pub mod solver;
pub mod steady;

pub use error::{Error, Result};

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts an integer count into the scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Nonlinearity64 = kinetics::Nonlinearity<f64>;
pub type WaveProfile64 = kinetics::WaveProfile<f64>;
pub type FunnelDomain64 = geometry::FunnelDomain<f64>;
pub type MappedGrid64 = geometry::MappedGrid<f64>;
pub type Field64 = solver::Field<f64>;
pub type StepperConfig64 = solver::StepperConfig<f64>;
pub type PastScheme64 = entire::PastScheme<f64>;
pub type Envelope64 = envelope::Envelope<f64>;
pub type BallProfile64 = steady::BallProfile<f64>;
pub type SteadyState64 = steady::SteadyState<f64>;

//! Phase-space numerics for reducing collisionless kinetic theory to
//! compressible fluid dynamics through Poisson maps.
//!
//! Everything numeric is generic over [`Real`]; the `*F64` and `*F32` aliases
//! below fix the scalar. The closure calculus also runs on [`Rational`].
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod brackets;
pub mod closure;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hamiltonians;
pub mod maxwellian;
pub mod moments;
pub mod samples;
pub mod scalar;

pub use error::{KinError, Result};
pub use grid::{GridConfig, PhaseField, PhaseGrid, SpatialField};
pub use hamiltonians::CouplingConstants;
pub use moments::{DistributionFunction, HydroState};
pub use scalar::{rational, Field, Rational, Real};

pub type PhaseGridF64 = PhaseGrid<f64>;
pub type PhaseFieldF64 = PhaseField<f64>;
pub type SpatialFieldF64 = SpatialField<f64>;
pub type DistributionF64 = DistributionFunction<f64>;
pub type HydroStateF64 = HydroState<f64>;
pub type PhaseGridF32 = PhaseGrid<f32>;
pub type PhaseFieldF32 = PhaseField<f32>;
pub type DistributionF32 = DistributionFunction<f32>;
pub type ClosureModelExact = closure::ClosureModel<Rational>;
pub type ClosureModelF64 = closure::ClosureModel<f64>;

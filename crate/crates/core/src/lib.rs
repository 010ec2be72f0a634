//! Finite-volume quantum drift-diffusion solver with adjoint-based doping design.
//!
//! Every numerical routine is generic over the scalar type through [`Real`]; the aliases
//! below fix it to `f64` (and `f32` where single precision is useful).

// Stencil loops index several arrays at once; `!(x > y)` comparisons deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod config;
pub mod discrete;
pub mod doping;
pub mod error;
pub mod mesh;
pub mod optimize;
pub mod output;
pub mod real;
pub mod run;
pub mod state;
pub mod sweep;

pub use error::{Error, Result};
pub use real::Real;

pub type Mesh = mesh::Mesh<f64>;
pub type DeviceGeometry = mesh::DeviceGeometry<f64>;
pub type ScalarField = discrete::ScalarField<f64>;
pub type DopingProfile = doping::DopingProfile<f64>;
pub type BoundaryData = doping::BoundaryData<f64>;
pub type SolverConfig = state::SolverConfig<f64>;
pub type Physics = state::Physics<f64>;
pub type StateTriple = state::StateTriple<f64>;
pub type CostConfig = adjoint::CostConfig<f64>;
pub type AdjointTriple = adjoint::AdjointTriple<f64>;
pub type ArmijoConfig = optimize::ArmijoConfig<f64>;
pub type OptimizationTrace = optimize::OptimizationTrace<f64>;
pub type Device = run::Device<f64>;
pub type SweepReport = sweep::SweepReport<f64>;

pub type Mesh32 = mesh::Mesh<f32>;
pub type ScalarField32 = discrete::ScalarField<f32>;
pub type StateTriple32 = state::StateTriple<f32>;

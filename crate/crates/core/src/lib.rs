//! Numerical construction of positive, axially symmetric solutions of the
//! Dirichlet problem
//!
//! ```text
//!     -Δu + u = a(x) |u|^{p-2} u   in  A = { R0 < |x| < R1 } ⊂ ℝ^N,
//!           u = 0                  on  ∂A,
//! ```
//!
//! for N ≥ 3 and supercritical exponents p > 2, together with a spectral
//! criterion that certifies when the ground state of the axial problem is
//! *not* radially symmetric.
//!
//! Axially symmetric fields are reduced to two variables: the radius
//! r = |x| ∈ [R0, R1] and the latitude θ = arcsin(x_N / r) ∈ [-π/2, π/2],
//! with volume element dx = ω_{N-2} r^{N-1} cos^{N-2}θ dr dθ.  All modules
//! operate on tensor-product grids in (r, θ):
//!
//! * [`grid`]       — annulus grids, fields, measure-exact quadrature;
//! * [`operators`]  — flux-form assembly of the H¹ bilinear forms;
//! * [`cone`]       — the invariant cone 𝒦 (nonnegative, even in θ,
//!                    nonincreasing in |θ|) and seeded sampling of it;
//! * [`resolvent`]  — conjugate-gradient resolvent (-Δ + Id)⁻¹ and the
//!                    fixed-point map T(u) = (-Δ + Id)⁻¹(a|u|^{p-2}u);
//! * [`energy`]     — action functional, Nehari scaling, second variation;
//! * [`flow`]       — descent flow u' = -(u - T(u)), separatrix bisection,
//!                    Newton polish of fixed points;
//! * [`radial`]     — the reduced 1-D radial problem and its Newton solver;
//! * [`spectral`]   — the weighted eigenvalue problem behind the
//!                    nonradiality criterion, certificates, parameter sweeps.
//!
//! Everything is generic over the floating-point scalar through [`Real`];
//! the `*64` aliases below fix f64 for ordinary use.

pub mod cone;
pub mod energy;
pub mod error;
pub mod flow;
pub mod grid;
mod interp;
pub mod measure;
pub mod operators;
pub mod radial;
pub mod resolvent;
pub mod spectral;
mod tridiag;

use std::fmt::{Debug, Display};

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive, NumAssignOps};

pub use error::Error;

/// Floating-point scalar the solver is generic over.
///
/// Implemented by `f32` and `f64` through the blanket impl; all algorithms
/// and tolerances are calibrated for `f64`, the `f32` instantiation exists
/// for cheap exploratory runs.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssignOps + std::iter::Sum + Debug + Display + Send + Sync + 'static
{
    /// Shorthand for embedding an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssignOps
        + std::iter::Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type ProblemParams64 = grid::ProblemParams<f64>;
pub type WeightFamily64 = cone::WeightFamily<f64>;
pub type AnnulusGrid64 = grid::AnnulusGrid<f64>;
pub type Field64 = grid::Field<f64>;
pub type OperatorSet64 = operators::OperatorSet<f64>;
pub type ConeReport64 = cone::ConeReport<f64>;
pub type EnergyBreakdown64 = energy::EnergyBreakdown<f64>;
pub type FlowConfig64 = flow::FlowConfig<f64>;
pub type FlowTrace64 = flow::FlowTrace<f64>;
pub type RadialSolution64 = radial::RadialSolution<f64>;
pub type SpectralResult64 = spectral::SpectralResult<f64>;
pub type SweepTable64 = spectral::SweepTable<f64>;

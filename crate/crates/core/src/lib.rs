//! Numerics for the warped-product metrics `dρ² + A(ρ)² g_sphere` whose radial
//! curvature is `+1` inside a ball of radius `r` and `-1` outside `r + ε`.
//!
//! The crate integrates the radial geodesic equation and the two scalar Jacobi
//! equations along the geodesics of these metrics, constructs the decaying
//! (stable) Jacobi solutions, and runs a parameter search that certifies, by
//! sampling, a smooth metric with boundary conjugate points along radial
//! geodesics and no interior conjugate points. Closed-form solutions for the
//! `C^{1,1}` metric at `(r, ε) = (π/4, 0)` are provided alongside the numerical
//! pipelines and serve as their oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geodesics;
pub mod jacobi;
pub mod ode;
pub mod profile;
pub mod search;
pub mod stable;

pub use error::{Error, Result};
pub use geodesics::{GeodesicParams, RadialSolution};
pub use jacobi::{FundamentalPair, JacobiKernel, KernelKind};

pub use ode::{Branch, IntegratorOptions, OdeError, OdeSystem, Tolerance, Trajectory};
pub use profile::{ProfileParams, WarpFunction};
pub use search::{ScanConfig, ScanReport};
pub use stable::{StableSolution, Verdict};

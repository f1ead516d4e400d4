//! Numerical machinery for extrinsic geometry of submanifolds in symmetric
//! ambient spaces: exact space models with curvature and transport,
//! finite-difference submanifold invariants, curvature-invariance and
//! parallelism checks, normal-exponential envelopes, Jacobi propagation,
//! loop-holonomy dual computations, and Frenet curve integration.

// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod error;
pub mod frenet;
pub mod linalg;
pub mod reduction;
pub mod submanifold;

pub use ambient::{
    parallel_transport, transport_frame, transport_with_trace, DiscretizedCurve, Point, SpaceModel,
    TangentVector,
};
pub use error::{GeomError, Result};
pub use linalg::{orthonormalize, subspace_residual, Form, Matrix, Subspace, Tolerance, Vector};

/// Residual bound for closed-form algebra.
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Residual bound for fixed-step ODE integration, per unit arc length.
pub const ODE_TOL: f64 = 1e-7;
/// Residual bound for first-order finite differences.
pub const FD_FIRST_TOL: f64 = 1e-5;
/// Residual bound for second-order (nested) finite differences.
pub const FD_SECOND_TOL: f64 = 1e-4;

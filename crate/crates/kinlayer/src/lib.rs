//! Numerical laboratory for the diffusive limit of steady neutron transport in
//! smooth convex planar domains with a geometrically corrected boundary layer.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] describes the domain by a polar radius `r(θ)` and provides
//!   curvature, boundary-fitted coordinates and ray exits.
//! * [`milne`] solves the half-space layer problem at a fixed boundary point,
//!   with or without the curvature force.
//! * [`elliptic`] solves the Neumann problem for the leading interior term.
//! * [`expansion`] assembles interior terms and the cut-off layer.
//! * [`transport`] is the reference discrete-ordinates solver at finite `ε`.
//! * [`harness`] runs the limit, regularity and comparison studies and writes
//!   their artifacts.

// NaN must fail validation, hence `!(x > 0.0)` style guards
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anderson;
pub mod data;
pub mod elliptic;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod geometry;
pub mod harness;
pub mod interp;
pub mod krylov;
pub mod milne;
pub mod par;
pub mod quad;
pub mod transport;

pub use error::{Error, Result};
pub use par::Exec;

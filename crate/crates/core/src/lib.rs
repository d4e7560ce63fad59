//! Spectral solver for time-periodic solutions of the forced resonant wave equation
//! `u_tt - u_xx = eps f(t, x, u)` on `T x (0, pi)` with Dirichlet conditions.

pub mod error;
pub mod fields;
pub mod forcing;
pub mod harness;
pub mod hbuilder;
pub mod identities;
pub mod operators;
pub mod quadrature;
pub mod range;
pub mod reducer;

pub use error::{Error, Result};
pub use fields::{Discretization, Grid, GridField, KernelElement, NormKind, SpectralField, TorusProfile, Truncation};
pub use forcing::ForcingSpec;
pub use harness::{Problem, RunConfig};
pub use hbuilder::{build_h, HResult};
pub use operators::OperatorWorkspace;
pub use range::{RangeConfig, SolverContext};

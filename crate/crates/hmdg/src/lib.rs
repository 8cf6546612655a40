//! A 2D finite element toolkit for incompressible wormhole propagation:
//! acid is injected into a porous rock, dissolves it, and carves
//! high-porosity channels.
//!
//! The discretization couples three pieces, advanced sequentially each
//! time step:
//!
//! 1. a pointwise porosity update driven by the clamped acid
//!    concentration (exact exponential integrator),
//! 2. a hybridized Raviart-Thomas mixed solve for Darcy pressure and
//!    velocity, statically condensed onto an edge Lagrange multiplier so
//!    the global system is symmetric positive definite,
//! 3. a symmetric interior penalty DG solve for the acid concentration
//!    with backward Euler in time.
//!
//! The `verify` module carries the manufactured-solution harness used to
//! confirm the convergence orders of each piece and of the combination.

pub mod basis;
pub mod chemistry;
pub mod config;
pub mod context;
pub mod darcy;
pub mod driver;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod rt;
pub mod transport;
pub mod verify;
pub mod vtk;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible data: {0}")]
    Incompatible(String),
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

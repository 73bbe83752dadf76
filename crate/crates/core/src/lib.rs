//! Stokes flow in the narrow neck between two rigid inclusions.
//!
//! The crate solves the incompressible Stokes Dirichlet problems that arise
//! when two rigid particles are suspended close to each other in a container,
//! evaluates the closed-form singular velocity/pressure pairs that capture
//! the near-contact behaviour, couples the rigid-motion amplitudes through
//! the interaction matrix, and fits blow-up rates of gradients, pressure and
//! Cauchy stress across gap-width sweeps.

pub mod analysis;
pub mod config;
pub mod fields;
pub mod geometry;
pub mod jet;
pub mod mesh;
pub mod report;
pub mod rigid;
pub mod sampling;
pub mod solver;

pub mod cli;

use thiserror::Error;

/// Crate-wide error type. `Config` maps to CLI exit code 2, everything else
/// to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

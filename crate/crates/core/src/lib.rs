//! Mixed local/nonlocal elliptic problems on an interval or a disk.
//!
//! The library discretizes the operator
//!
//! ```text
//!   L_gamma u = -Delta u + gamma * (-Delta)^s u~ + a u + q . grad u
//! ```
//!
//! on a bounded domain with a classical Neumann condition on the boundary.
//! Exterior values of the field `u~` are not unknowns: every exterior point
//! carries the kernel-weighted average of the interior values, which makes the
//! nonlocal flux vanish identically outside the domain. On top of the solver
//! the crate provides verification tooling: kernel identities, seminorm
//! diagnostics, exterior gradient blow-up rates, a maximum-principle campaign,
//! and brute-force quadrature oracles.

pub mod config;
pub mod extension;
pub mod fitting;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod presets;
pub mod runner;
pub mod solver;
pub mod verification;

/// Unified error type for the whole crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is not strictly exterior to the domain (distance {delta})")]
    NotExterior { delta: f64 },

    #[error("point is not an interior node of the grid")]
    NotInterior,

    #[error("grid construction failed: {0}")]
    GridConstruction(String),

    #[error("exterior cache missing; call extend() first")]
    MissingExteriorCache,

    #[error("exterior cache is stale: built for (s={cached_s}, r_trunc={cached_r}, grid #{cached_grid}), needed (s={want_s}, r_trunc={want_r}, grid #{want_grid})")]
    StaleExteriorCache {
        cached_s: f64,
        cached_r: f64,
        cached_grid: u64,
        want_s: f64,
        want_r: f64,
        want_grid: u64,
    },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("linear system is numerically singular (condition estimate {cond_estimate:.3e})")]
    SingularSystem { cond_estimate: f64 },

    #[error("continuation stalled at gamma={gamma} with step eps={eps} below the floor {eps_floor}")]
    ContinuationStalled { gamma: f64, eps: f64, eps_floor: f64 },

    #[error("too few exterior shells for a rate fit: have {have}, need at least {need}")]
    InsufficientShells { have: usize, need: usize },

    #[error("operation `{op}` supports 1D intervals only (domain dimension {dim})")]
    DimensionUnsupported { op: &'static str, dim: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error is a usage/configuration problem (as opposed to a
    /// numerical failure). The CLI maps the two classes to different exit codes.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidDomain(_) | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

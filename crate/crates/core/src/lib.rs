//! Frequency-domain nonlinearity parameter tomography.
//!
//! Ultrasound propagation with a quadratic nonlinearity generates higher
//! harmonics wherever the nonlinearity coefficient is active. After a
//! multiharmonic expansion, each harmonic satisfies a Helmholtz equation whose
//! source is supported on the unknown inclusion set, so locating the
//! inclusions becomes an inverse source problem for a cascade of Helmholtz
//! equations with impedance boundary conditions.
//!
//! The crate provides the full reconstruction pipeline:
//!
//! * [`specfun`] — Bessel/Hankel functions and the Helmholtz mean-value factor,
//! * [`geometry`] — star-shaped inclusion curves, discs and quadrature,
//! * [`forward`] — free-space convolution plus a boundary-integral correction
//!   on a disc domain, and the harmonic cascade,
//! * [`pdap`] — greedy sparse recovery of weighted point sources from flux data,
//! * [`eqdiscs`] — conversion of point-source weights into equivalent discs,
//! * [`shape_newton`] — simultaneous Gauss–Newton refinement of the boundary
//!   curves against the measured traces,
//! * [`abstract_newton`] — a 1-D spectral model of the all-at-once formulation
//!   with a regularized frozen Newton solver and injectivity diagnostics,
//! * [`harness`] — scenarios, noise injection, diagnostics and the CLI driver.
//!
//! ```
//! use nlpt::specfun::mean_value_factor;
//!
//! // Averaging a Helmholtz kernel element over a disc of radius r scales its
//! // center value by 2 J1(kr)/(kr); the factor tends to 1 for small discs.
//! assert!((mean_value_factor(2, 0.0).unwrap() - 1.0).abs() < 1e-15);
//! assert!(mean_value_factor(2, 3.8317059702075123).unwrap().abs() < 1e-12);
//! ```

pub mod abstract_newton;
pub mod eqdiscs;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod pdap;
pub mod shape_newton;
pub mod specfun;

use thiserror::Error;

/// Errors shared across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("evaluation at a source point")]
    Singularity,
    #[error("boundary system ill-conditioned (cond = {0:.3e}), possibly near resonance")]
    IllConditioned(f64),
    #[error("weight magnitude {requested:.6e} exceeds the monotone branch maximum {max:.6e}")]
    OutOfBranch { requested: f64, max: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("isomorphism violated: {0}")]
    IsomorphismViolation(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Random graphs built as unions of independent Bernoulli layers, and the
//! machinery to study when such unions become k-connected.
//!
//! A model is a joint law for a pair `(X, Q)`: each layer picks `min(X, n)`
//! vertices uniformly at random and joins each pair independently with
//! probability `Q`. The union of `m` independent layers is the graph under
//! study. The crate provides:
//!
//! * [`dist`] — model descriptions (finite support or parametric) and the
//!   moment functionals that summarize them,
//! * [`theory`] — threshold formulas, their inversion, and closed-form upper
//!   bounds for block-separation probabilities,
//! * [`graph`] — seeded, reproducible layer sampling and union assembly,
//! * [`connectivity`] — exact k-connectivity decisions (flow based) plus
//!   brute-force cross-checks,
//! * [`stats`] — Monte Carlo estimators with deterministic aggregation,
//! * [`harness`] — experiment sweeps, bound verification, and the CSV/JSON
//!   reporting used by the `kconn` binary.

#![forbid(unsafe_code)]

pub mod connectivity;
pub mod dist;
pub mod flow;
pub mod graph;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod theory;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution description failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// An argument fell outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Threshold inversion has no solution in range.
    #[error("not solvable: {0}")]
    NotSolvable(String),
    /// A closed-form prediction was requested for degenerate inputs.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// An exhaustive search would exceed its enumeration guard.
    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),
    /// Per-layer degree data is required but absent (imported graph).
    #[error("layer degree data missing: {0}")]
    MissingLayerData(String),
    /// The model fails a precondition required by the experiment.
    #[error("model precondition failed: {0}")]
    PreconditionFailed(String),
    /// A file had the wrong shape.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

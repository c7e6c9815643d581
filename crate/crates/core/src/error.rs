use std::fmt;

use thiserror::Error;

/// Location and value of the most negative metric coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityFailure {
    /// Index of the offending node in the surface's node ordering.
    pub node: usize,
    /// Human-readable coordinates of the node (`(x, y)` on the torus, `r` on CP¹).
    pub location: (f64, f64),
    /// The metric coefficient at that node, `<= 0`.
    pub value: f64,
}

impl fmt::Display for PositivityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "metric coefficient {:.6e} at node {} ({:.6}, {:.6})",
            self.value, self.node, self.location.0, self.location.1
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution {0} is below the minimum of 8")]
    ResolutionTooSmall(usize),

    #[error("radial cutoff {0} must be finite and greater than 1")]
    InvalidCutoff(f64),

    #[error("field does not live on the requested surface")]
    SurfaceMismatch,

    #[error("field has a non-finite value at node {0}")]
    NonFinite(usize),

    #[error("aliasing guard: {context} leaves a relative {fraction:.3e} of its content outside the resolved band")]
    Aliasing { context: String, fraction: f64 },

    #[error("metric is not positive: {0}")]
    Positivity(PositivityFailure),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series is not S¹-invariant (defect {0:.3e})")]
    NotInvariant(f64),

    #[error("jet division by a non-invertible leading coefficient at node {0}")]
    JetDivision(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

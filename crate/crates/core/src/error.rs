use thiserror::Error;

/// Errors raised while validating grids or evaluating invariants.
#[derive(Debug, Error)]
pub enum InvariantError {
    #[error(
        "sample at grid point {point:?} deviates from unitarity by {deviation:.3e} \
         (tolerance {tolerance:.1e})"
    )]
    NotUnitary {
        point: [usize; 3],
        deviation: f64,
        tolerance: f64,
    },

    /// Diagonalization produced a non-orthonormal or non-converged eigenbasis.
    /// Unitary matrices are normal, so this signals an invalid input.
    #[error("eigendecomposition at grid point {point:?} failed: {detail}")]
    Diagonalization { point: [usize; 3], detail: String },

    /// The discretization cannot resolve the map; refine the grid.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("gap violation: {0}")]
    GapViolation(String),

    #[error("gap tracking ambiguous: {0}; use the direct per-gap evaluation instead")]
    TrackingAmbiguous(String),

    /// Contradictory intermediate data, e.g. broken band transport.
    #[error("internal consistency failure: {0}")]
    Inconsistency(String),

    #[error("operation requires axis {axis} to be periodic")]
    NotPeriodic { axis: usize },

    #[error("{0}")]
    InvalidInput(String),
}

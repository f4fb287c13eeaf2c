use num_complex::Complex64;

/// Library-wide error type.
///
/// Variants split into three families that callers (in particular the CLI)
/// treat differently: invalid input, numerical-domain failures (spectral
/// parameter outside the admissible half-plane, loss of positivity,
/// overflow), and i/o or parse problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix entry overflow while propagating cell {cell}; growth of exp((Im z) x) is intrinsic at this spectral point")]
    Overflow { cell: usize },

    #[error("spectral point z = {z} outside the admissible half-plane (margin {margin:.3e} <= 0)")]
    OutsideDomain { z: Complex64, margin: f64 },

    #[error("{context} is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { context: &'static str, min_eig: f64 },

    #[error("Moebius denominator nearly singular (min singular value {sigma:.3e}); the pair is invalid at this z or z lies outside the half-plane")]
    SingularPair { sigma: f64 },

    #[error("null space dimension {found} != {expected} at node {node}; row data corrupted")]
    RankDeficiency {
        node: usize,
        found: usize,
        expected: usize,
    },

    #[error("basis alignment anomaly at node {node}")]
    Continuity { node: usize },

    #[error("truncated transform not converged: relative change {change:.3e} > {tol:.3e} under half-length doubling; increase the truncation half-length")]
    Truncation { change: f64, tol: f64 },

    #[error("linear-fractional denominator condition number {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { cond: f64, cap: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of numerical nature rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::OutsideDomain { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularPair { .. }
                | Error::RankDeficiency { .. }
                | Error::Continuity { .. }
                | Error::Truncation { .. }
                | Error::IllConditioned { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

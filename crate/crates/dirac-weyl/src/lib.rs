//! Direct and inverse Weyl problems for skew-self-adjoint Dirac systems
//! with rectangular matrix potentials.
//!
//! The crate covers one pipeline end to end at double precision:
//!
//! * [`propagator`] — the fundamental solution u(x, z) of
//!   u' = (izj + jV)u on a sampled potential grid, its gram matrix
//!   u* j u, and the boundary rows at z = 0;
//! * [`ball`] / [`weyl`] — the nested matrix balls of Moebius-transform
//!   values and the Weyl function as the limit of their centers, with
//!   computable error bounds;
//! * [`snode`] — the kernel operator generated by the profile, the
//!   transfer matrix built on its restricted inverses, and the
//!   factorization check tying it back to u;
//! * [`inverse`] — recovery of the potential from Weyl data (truncated
//!   oscillatory inversion, boundary-row reconstruction, completion,
//!   differentiation) plus the exponential-agreement uniqueness test;
//! * [`nls`] — zero-curvature data of the focusing matrix NLS flow and the
//!   linear fractional evolution of the Weyl function in time.
//!
//! All operations are pure given immutable inputs and safe to evaluate
//! concurrently across spectral points.

pub mod ball;
pub mod error;
pub mod grid;
pub mod inverse;
pub mod linalg;
pub mod nls;
pub mod propagator;
pub mod snode;
pub mod synth;
pub mod weyl;

pub use error::{Error, Result};
pub use grid::{PotentialGrid, PotentialSpec, Signature, SpectralPoint};
pub use linalg::{CMat, CVec};

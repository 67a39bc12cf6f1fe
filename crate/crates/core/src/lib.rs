//! Recovery of signals that lie in a union of known subspaces.
//!
//! The crate covers the subspace model and its singular-value constants, the
//! atomic norm and its dual, a latent group lasso solver (exact, noisy and
//! penalized), closed-form sample-complexity bounds, orthonormal Haar
//! transforms with parent-child groupings, and Monte-Carlo harnesses that
//! check the bounds empirically.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod solver;
pub mod subspace;
pub mod wavelet;

pub use error::{Error, Result};
pub use subspace::{GroupStructure, SubspaceModel, SupportSet};

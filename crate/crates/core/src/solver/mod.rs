//! Latent group lasso solvers.
//!
//! Overlapping groups and general subspaces are handled by replicating the
//! coefficients into disjoint latent blocks (`Φ ↦ [ΦK_1 … ΦK_M]`) and running
//! accelerated proximal gradient on the resulting non-overlapping problem.

mod config;
mod ensemble;
mod fista;
mod latent;
mod recover;

pub use config::SolverConfig;
pub use ensemble::MeasurementEnsemble;
pub use fista::{lipschitz, solve_penalized, PenalizedProblem, PenalizedSolution};
pub use latent::{group_prox, replicate, split_latent, LatentGroups};
pub use recover::{
    lasso_model, recover, solve_lasso, Method, PathPoint, RecoveryMode, RecoveryResult, ACTIVE_BLOCK_TOL,
    EXACT_RESIDUAL, SUCCESS_REL_ERR,
};

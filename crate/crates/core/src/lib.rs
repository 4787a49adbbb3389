//! Polyadic decompositions of matrix multiplication tensors.
//!
//! The crate builds the tensors `T_mpn`, parameterizes candidate
//! decompositions with a generalized cyclic-symmetric block layout, searches
//! for exact decompositions with an augmented-Lagrangian / Levenberg–Marquardt
//! least-squares solver, discretizes them to `{−1, 0, 1}` entries and
//! composes them recursively.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod discretize;
pub mod error;
pub mod fixtures;
pub mod layout;
pub mod mmt;
pub mod nls;
pub mod pdfile;
pub mod solver;
pub mod transforms;

pub use campaign::{run_campaign, CampaignConfig, CampaignSummary, StSelection};
pub use discretize::{discretize, h_discr, DiscretizeConfig, DiscretizeFailure, FailureReason};
pub use error::{Error, Result};
pub use layout::{contract, enumerate_st, expand, structure_map, Blocks, GenCsLayout, StructureMap, StructuredPoint};
pub use mmt::{
    apply_base_algorithm, build_mmt, naive_pd, reconstruct, verify_pd, FactorTriple, Mmt, Shape, Tensor3, Verdict,
};
pub use nls::{full_jacobian, jacobian, reduced_residual_cs, residual, NlsProblem, Residual};
pub use pdfile::PdRecord;
pub use solver::{
    al_solve, al_solve_from, lm_minimize, starting_point, AlState, HKind, HistoryEntry, LmConfig, SolveOutcome,
    SolverConfig, Status, Violations,
};
pub use transforms::{apply_transform, jacobian_rank, recursive_cs_pd, recursive_pd, InvTransform, JacobianReport};

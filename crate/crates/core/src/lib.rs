//! Exact l0-regularized sparse optimization at desk scale.
//!
//! The objective is `f(x) = g(x) + λ ||Mx||_0` for a fidelity term `g` and
//! a transform `M`. Adding `λ ||M·||_0` lifts each stratum
//! `B_j = {x : ||Mx||_0 = j}` of the landscape of `g` by `λ j`, so the
//! global minimizer of `f` is decided by comparing restricted minima of `g`
//! across sparsity levels. This crate provides:
//!
//! - [`sparsity`]: l0 counts, supports, level partitions and safety radii.
//! - [`transform`]: the dense transform, its SVD and the preimage partition.
//! - [`fidelity`]: the fidelity models and the regularized objective.
//! - [`solver`]: support-restricted minimization and the brute-force global
//!   minimizer used as ground truth.
//! - [`lambda`]: intervals of λ that force a prescribed sparsity level.
//! - [`verify`]: checks of necessary optimality conditions and of the
//!   local-minimizer equivalence for the coupled models.

pub mod error;
pub mod fidelity;
pub mod lambda;
mod linalg;
mod restricted;
pub mod sampling;
pub mod solver;
pub mod sparsity;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use fidelity::{BlackBoxFidelity, Coupling, FidelityModel, Point, RegularizedObjective};
pub use lambda::{LambdaInterval, LambdaRule, Witness};
pub use solver::{
    global_minimize_f, local_min_probe, minimize_on_gamma, minimize_on_level, minimize_on_support,
    EnumerationBudget, ProbeOptions, ProbeOutcome, RequestedSet, SolveReport,
};
pub use sparsity::{SparsityLevel, SupportSet, ZeroTolerance};
pub use transform::{IdentityTransform, SvdReduction, Transform};
pub use verify::{ClaimTag, VerdictWitness, VerificationVerdict};

pub use nalgebra::{DMatrix, DVector};

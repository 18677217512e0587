//! Cost programs as semidefinite programs, a dense interior-point solver and
//! feasibility checks for supplied points.
//!
//! The primal program minimizes `p1 + p2` over `J1, J2 ⪰ 0` (unnormalized
//! Choi operators of the two channels) such that every `B Bj` marginal of
//! `J1 - J2` equals `Φ_d` and `tr_{B1..Bn} Ji = pi I`. Operator equations are
//! expanded into real equations through [`HermitianBasis`].

mod basis;
mod check;
mod problem;
mod solver;
mod sparse;

pub use basis::HermitianBasis;
pub use check::{
    check_feasible_dual, check_feasible_primal, check_point, dual_candidate_from_primal, primal_candidate,
    DualCandidate, FeasibilityReport,
};
pub use problem::{
    build_dual, build_dual_capped, build_primal, build_primal_capped, coordinate_name, BlockVar, Equality,
    EqualityGroup, LinearForm, NamedValues, Point, ProblemKind, ProblemMeta, ScalarDomain, ScalarVar, SdpProblem,
    Sense, SDP_SCHEMA,
};
pub use solver::{solve, SdpSolution, SolveOptions, SolveStatus};
pub use sparse::SparseHermitian;

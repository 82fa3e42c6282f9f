//! Krylov subspace methods for real skew-symmetric linear systems, plus a
//! verification harness for the subspace identities that make them
//! equivalent.
//!
//! A nonsingular skew-symmetric system `Ax = b` can be attacked either with
//! methods that search the plain Krylov subspace of `A` and `b` (Galerkin or
//! minimum-residual iterates) or with the conjugate-gradient normal-equation
//! methods, which search a subspace of half the dimension generated by `A^2`.
//! This crate implements both families:
//!
//! - [`solvers`]: the CGNE and CGNR recurrences, in the general form and in
//!   the skew-specialized form that replaces `A^t` with `-A`.
//! - [`reference`](mod@reference): explicit-basis Galerkin and
//!   minimum-residual solvers and brute-force subspace minimizers, used as
//!   independent cross-checks.
//! - [`krylov`]: orthonormal basis construction, the even/odd power split of
//!   a Krylov vector, and orthogonality measurements between subspaces.
//! - [`equivalence`]: executable checks that the two families produce the
//!   same iterates and that leaving the half-dimensional subspace cannot
//!   lower the error or residual, reported with measured deviations.
//! - [`operator`], [`dense`], [`sparse`]: matrix-free operators, the dense
//!   direct-solve oracle, and strict-upper sparse skew storage.
//!
//! Everything random is driven by the fixed generator in [`rng`], so any
//! instance or check is reproducible from its seed.

pub mod dense;
pub mod equivalence;
pub mod error;
pub mod krylov;
pub mod operator;
pub mod precondition;
pub mod reference;
pub mod rng;
pub mod solvers;
pub mod sparse;

pub use dense::{skew_symmetrize, DenseMatrix};
pub use equivalence::{
    check_equivalence, check_orthogonality, check_projection, compare_methods, scaled_tolerance,
    CheckRecord, Instance, InstanceDescriptor, InstanceSource, IterationRow, MethodStat, RunReport,
    Summary,
};
pub use error::{Error, Result};
pub use krylov::{
    build_basis, mutual_gram, solution_orthogonality, split_even_odd, EvenOddSplit,
    EvenOddSplitter, KrylovBasis,
};
pub use operator::{
    norm_estimate, verify_skew, FnOperator, LinearOperator, OpKind, SkewReport, SquaredOperator,
    Vector,
};
pub use precondition::{precondition, PrecondSide, PreconditionedSystem};
pub use reference::{
    error_minimizer_oracle, galerkin_reference, minres_reference, residual_minimizer_oracle,
    GalerkinIterate,
};
pub use rng::Rng;
pub use solvers::{
    cgne_general, cgne_skew, cgnr_general, cgnr_skew, IterateHistory, SolveResult, SolverConfig,
    Termination,
};
pub use sparse::{random_skew, SparseSkewMatrix, Triplet};

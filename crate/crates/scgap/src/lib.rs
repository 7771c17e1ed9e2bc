//! Finite-alphabet toolkit for KL-penalized distribution optimization and
//! strong-converse gap bounds.
//!
//! The crate provides, at desk scale:
//! - exact probability machinery on products of finite alphabets
//!   ([`dist`]): marginals, conditionals, divergences, exponential tilting;
//! - a family of score functionals combining fixed tables with signed
//!   log-marginal terms, their expectation and cumulant generating function
//!   ([`score`]);
//! - a KL-penalized relaxation of constrained extremum problems through a
//!   registered projection map, with the conditional log-ratio machinery
//!   that controls the relaxation ([`relaxation`]);
//! - a brute-force simplex-grid oracle and a seeded multi-start
//!   multiplicative-weights heuristic ([`optimize`]);
//! - closed-form gap bounds and the `O(1/√n)` blocklength outer-bound gap
//!   ([`bounds`]);
//! - the decoder-side-information rate-distortion instantiation tying it all
//!   together ([`wyner_ziv`]);
//! - a named verification suite over all of the above ([`suite`]).

pub mod bounds;
pub mod dist;
pub mod error;
pub mod optimize;
pub mod relaxation;
pub mod sample;
pub mod score;
pub mod suite;
pub mod wyner_ziv;

/// Crate-wide numeric tolerances.
pub mod tol {
    /// Absolute tolerance for probability normalization checks. Inputs
    /// outside it are rejected, never silently renormalized.
    pub const NORM_ABS: f64 = 1e-12;
    /// Additive slack absorbing log-sum-exp rounding in inequality checks.
    pub const INEQ_SLACK: f64 = 1e-9;
    /// Residual tolerance for feasibility predicates.
    pub const PREDICATE: f64 = 1e-9;
}

pub use bounds::{
    baseline_gap_bound, converse_gap, curvature_gap_bound, upsilon_at, wz_gap_bound, BoundReport,
    ConverseGap,
};
pub use dist::{
    conditional_mutual_information, kl_divergence, moments, tilt, total_variation_l1,
    AlphabetProduct, ConditionalTable, JointDist, Moments,
};
pub use error::{Error, Result};
pub use optimize::{
    curvature_constants, extremize_penalized, extremize_score, grid_enumerate, CandidateSource,
    CurvatureConstants, ExtremumResult, Method, OptimizerConfig, Sense,
};
pub use relaxation::{
    apply_map, corrected_cgf_pair, holder_factors, penalized_cgf, penalized_score,
    verify_decomposition, Constraint, FeasibleKind, FeasibleSet, ProjectionMap, RatioTerm,
    RelaxationSpec, Sign,
};
pub use score::{regularity_constants, FixedTerm, MarginalTerm, RegularityConstants, ScoreSpec};
pub use suite::{run_suite, CheckResult, SuiteConfig};
pub use wyner_ziv::{
    rd_region, rd_support, rd_support_penalized, relaxation_gap, wz_curvature, wz_regularity,
    RegionKind, RegionPolyline, WzInstance, WzProblem, WzRegion,
};

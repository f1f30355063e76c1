//! Divergence-regularized optimal transport between finitely supported
//! measures, solved through the dual, plus the Monte-Carlo machinery to
//! study the statistical behavior of the empirical cost: error-rate fits,
//! bias/variance splits, bounded-differences checks, and central limit
//! experiments with plug-in asymptotic variances.
//!
//! The crate is organized around small, testable pieces:
//!
//! * [`divergence`]: regularizers through their convex conjugates
//! * [`measure`]: discrete measures, sampling, cost matrices
//! * [`solver`]: dual coordinate ascent, plans, duality gaps, extensions
//! * [`hoeffding`]: kernel ANOVA on product spaces
//! * [`stats`]: replicated experiments and reports
//! * [`io`]: CSV ingestion and deterministic report rendering
//! * [`check`]: randomized invariant suite used by the CLI

#![forbid(unsafe_code)]

pub mod check;
pub mod divergence;
pub mod hoeffding;
pub mod io;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod stats;

pub use check::{random_instance, run_invariant_suite, suite_passed, CheckResult};
pub use divergence::{conjugate_oracle, Divergence, DivergenceError, DualRegularity};
pub use hoeffding::{decompose, projection_inequality_check, HoeffdingError, HoeffdingParts};
pub use measure::{
    build_cost, sample_empirical, CostKind, CostMatrix, DiscreteMeasure, MeasureError,
};
pub use rng::{replicate_rng, stream_id};
pub use solver::{
    dual_objective, extend_potential, marginal_residuals, oscillation, primal_objective,
    recover_plan, solve, solve_scaled, weak_duality_gap, DualSolution, Side, SolveConfig,
    SolverError, TransportPlan,
};
pub use stats::{
    ks_statistic, standard_normal_cdf, Centering, CltMode, CltParams, CltReport,
    CrossTermTable, DeviationProfile, EfronSteinCheck, LinearizationRow, RateParams,
    RateReport, StatsError, StatsProblem, Variances,
};

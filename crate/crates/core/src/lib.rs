//! Locally D-optimal designs for 2×2 factorial experiments with binary
//! response, and the robustness of those designs to misspecified parameters.
//!
//! The crate covers:
//! - the four standard binary links and their GLM weights ([`link`]),
//! - the reduced determinant criterion on the allocation simplex ([`design`]),
//! - an exact/numerical optimal-design solver with a grid-search oracle
//!   ([`solver`]),
//! - worst-case efficiency-loss bounds over weight ranges, including the
//!   piecewise worst case of the uniform design ([`robustness`]),
//! - a seeded Monte Carlo sensitivity study with CSV export ([`simulation`]),
//! - IRLS fitting of the main-effects model to 2×2 cell counts ([`glm`]).

pub mod design;
pub mod error;
pub mod glm;
pub mod link;
pub mod robustness;
pub mod simulation;
pub mod solver;

pub use design::{
    det_criterion, information_matrix, objective_l, relative_loss, variance_from_weight,
    DesignMeasure, InfoMatrix, VarianceVector, WeightVector,
};
pub use error::{Error, Result};
pub use glm::{analyze, fit_glm, BinomialTable, CellCount, FitResult, GlmFit};
pub use link::{
    weight_curve, weights_from_beta, BetaVector, CurvePoint, LinkFunction, DESIGN_POINTS,
};
pub use robustness::{
    closed_q, q_products, q_ratio, r_max, r_max_unbounded, r_max_uniform, standardized_distance,
    theta_star, uniform_loss, QProducts, RangeSpec, RmaxCase, RmaxPattern, RmaxReport,
};
pub use simulation::{
    export_study, run_study, sample_weights, saturated_fraction, spearman, CandidateSummary,
    SampleRecord, StudyConfig, StudyResult,
};
pub use solver::{
    allocate, grid_oracle, is_saturated, solve, solve_corollary1, solve_corollary2, solve_general,
    solve_general_from, solve_saturated, Branch, SolveResult, SolverConfig,
};

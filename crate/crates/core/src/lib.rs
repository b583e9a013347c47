//! Ridge regression, early-stopped gradient descent and scheduled one-pass SGD
//! for well-specified linear regression, with exact risk oracles and
//! excess-risk bound calculators.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod problem;
pub mod risk;
pub mod seed;

pub use bounds::{
    gd_lower_bound, gd_ridge_type_bound, gd_sgd_type_bound, power_law_exponent, ridge_bound, sgd_bound,
    shrinkage_matrix, Algorithm, BoundReport,
};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{gd_analytic, gd_path, max_stable_stepsize, ridge_fit, sgd_run, sgd_schedule, EstimatorConfig};
pub use experiments::{
    dominance_gd_vs_ridge, dominance_gd_vs_sgd, hard_instance_separation, rate_fit, rate_table, tune_and_measure,
    RateFit, RateOptions, SeparationOptions, SweepResult, TuneTarget,
};
pub use problem::{
    check_spectrum_condition, class_membership, make_custom_problem, make_power_law_problem, make_spike_problem,
    min_sigma_lambda, sample_dataset, BoundConstants, Design, ProblemInstance, ProblemSpec, Spectrum,
};
pub use risk::{
    excess_risk, fixed_design_gd_risk, fixed_design_ridge_risk, gd_conditional_risk, monte_carlo_risk,
    ridge_conditional_risk, sgd_exact_risk_gaussian, DesignSummary, Filter, RiskEstimate, RiskMethod, T_INFINITY,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

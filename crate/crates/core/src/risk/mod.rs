//! Risk laboratory: exact and Monte Carlo soft-threshold risk, minimax
//! experiments over adversary families, rate fits and probability-bound checks.

pub mod bounds;
pub mod functional;
pub mod max_estimator;
pub mod minimax;
pub mod report;

pub use bounds::{
    deviation_ratio_probe, fourth_moment_sandwich, tail_bound_check, DeviationRow, SandwichCheck, TailBoundParams,
    TailCheck,
};
pub use functional::{gaussian_soft_risk, mc_soft_risk, McEstimate};
pub use max_estimator::{max_estimator, max_estimator_risk, MaxRiskCheck};
pub use minimax::{
    calibrate, gaussian_exact_minimax, gaussian_ratio_experiment, minimax_risk, risk_matrix, McControl, MinimaxResult,
    RatioResult, RiskMatrix,
};
pub use report::{rate_fit, RateFit, RiskReport, RiskRow};

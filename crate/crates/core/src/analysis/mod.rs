//! Closed-form performance analysis and the sweeps built on it.

mod estimate;
mod formulas;
mod sweep;

pub use estimate::{
    estimate_alpha, estimate_alpha_on_corpus, estimate_lenient_alpha, AlphaEstimate,
};
pub use formulas::{
    beta, expected_tokens, improvement_condition, lenient_alpha, memory_access_factor,
    ops_factor, optimal_gamma, oracle_gamma_bound, walltime_factor, AnalysisError, CostModel,
    Improvement, OptimalGamma, DEFAULT_GAMMA_MAX,
};
pub use sweep::{sweep, SweepGrid, SweepKind, TABLE1_ROWS};

//! Verification and simulation.
//!
//! [`exact_step_distribution`] integrates one speculative token analytically
//! and is the oracle for the sampler's exactness. The statistical tests check
//! the sampled path against it and against the capped-geometric law for
//! tokens per step; [`simulate_walltime`] charges decoding traces against a
//! cost model.

mod equivalence;
mod exact;
mod geometric;
mod rejection;
mod simulate;
pub mod stats;

use thiserror::Error;

pub use equivalence::{equivalence_test, EquivalenceReport, MeanCheck, MIN_EQUIVALENCE_SAMPLES};
pub use exact::{exact_step_distribution, EXACT_VOCAB_LIMIT};
pub use geometric::{capped_geometric_pmf, geometric_fit_test, stateless_pair_for_alpha};
pub use rejection::{rejection_comparison, RejectionRow};
pub use simulate::{exp_emp_table, simulate_walltime, simulate_walltime_runs, RunStats, SimReport};
pub use stats::ChiSquareResult;

use crate::distmath::{normalize, DistError, Distribution};
use crate::engine::EngineError;
use crate::rng::Stream;

/// Default pass threshold for p-values.
pub const DEFAULT_P_THRESHOLD: f64 = 0.001;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("vocabulary of {0} exceeds the enumeration limit")]
    VocabTooLarge(usize),
    #[error("invalid harness parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}

/// Random distribution over `n` tokens; each entry is zeroed with
/// probability `zero_fraction` (at least one entry stays positive).
pub fn random_distribution(rng: &mut Stream, n: usize, zero_fraction: f64) -> Distribution<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                let keep = rng.uniform() >= zero_fraction;
                // cubing spreads the mass so pairs range from close to far apart
                let w = rng.uniform().powi(3);
                if keep { w } else { 0.0 }
            })
            .collect();
        if let Ok(d) = normalize(&raw) {
            return d;
        }
    }
}

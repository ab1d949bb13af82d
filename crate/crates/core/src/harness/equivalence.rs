use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{empirical_tv, two_sample, ChiSquareResult};
use super::HarnessError;
use crate::distmath::{sample, standardize, TokenId};
use crate::engine::{speculative_step, SpecConfig};
use crate::models::LanguageModel;
use crate::rng::Stream;

/// Minimum samples per context accepted by [`equivalence_test`].
pub const MIN_EQUIVALENCE_SAMPLES: usize = 10_000;

/// Sample mean compared against a closed-form expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub observed: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl MeanCheck {
    pub fn new(observed: f64, expected: f64, tolerance: f64) -> Self {
        let relative_error = ((observed - expected) / expected).abs();
        MeanCheck { observed, expected, relative_error, tolerance, passed: relative_error <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// One chi-square result per context (a single entry for goodness of fit).
    pub tests: Vec<ChiSquareResult>,
    /// Smallest per-test p-value times the number of tests, capped at 1.
    pub combined_p_value: f64,
    /// Largest empirical total variation distance across tests.
    pub max_tv: f64,
    /// Samples drawn per arm and test.
    pub n_samples: usize,
    pub threshold: f64,
    pub mean: Option<MeanCheck>,
    pub passed: bool,
}

impl EquivalenceReport {
    pub(crate) fn from_tests(
        tests: Vec<ChiSquareResult>,
        max_tv: f64,
        n_samples: usize,
        threshold: f64,
        mean: Option<MeanCheck>,
    ) -> Self {
        let min_p = tests.iter().map(|t| t.p_value).fold(1.0, f64::min);
        let combined_p_value = (min_p * tests.len() as f64).min(1.0);
        let passed = combined_p_value > threshold && mean.map_or(true, |m| m.passed);
        EquivalenceReport { tests, combined_p_value, max_tv, n_samples, threshold, mean, passed }
    }
}

/// Compares the first token of a speculative step against direct sampling
/// from the target, per context, with a two-sample chi-square test.
///
/// Context `i` uses streams `(seed, i, 0)` for the speculative arm and
/// `(seed, i, 1)` for the direct arm, so contexts run in parallel without
/// affecting the outcome.
pub fn equivalence_test<P, Q>(
    target: &P,
    draft: &Q,
    config: &SpecConfig,
    n_samples: usize,
    contexts: &[Vec<TokenId>],
    threshold: f64,
) -> Result<EquivalenceReport, HarnessError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    if n_samples < MIN_EQUIVALENCE_SAMPLES {
        return Err(HarnessError::InvalidParameter(format!(
            "need at least {MIN_EQUIVALENCE_SAMPLES} samples per context, got {n_samples}"
        )));
    }
    if contexts.is_empty() || contexts.iter().any(|c| c.is_empty()) {
        return Err(HarnessError::InvalidParameter("contexts must be non-empty".into()));
    }
    config.validate(target.vocab_size())?;
    let vocab = target.vocab_size();

    let per_context = contexts
        .par_iter()
        .enumerate()
        .map(|(ci, ctx)| -> Result<(ChiSquareResult, f64), HarnessError> {
            let mut spec_counts = vec![0u64; vocab];
            let mut rng = Stream::split(config.seed, ci as u64, 0);
            for _ in 0..n_samples {
                let (tokens, _) = speculative_step(target, draft, ctx, config, &mut rng)?;
                spec_counts[tokens[0].index()] += 1;
            }
            let p = standardize(&target.evaluate(ctx), target.score_kind(), &config.policy)?;
            let mut direct_counts = vec![0u64; vocab];
            let mut rng = Stream::split(config.seed, ci as u64, 1);
            for _ in 0..n_samples {
                direct_counts[sample(&p, &mut rng).index()] += 1;
            }
            Ok((two_sample(&spec_counts, &direct_counts), empirical_tv(&spec_counts, &direct_counts)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let max_tv = per_context.iter().map(|r| r.1).fold(0.0, f64::max);
    let tests = per_context.into_iter().map(|r| r.0).collect();
    Ok(EquivalenceReport::from_tests(tests, max_tv, n_samples, threshold, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::Distribution;
    use crate::engine::Mutation;
    use crate::models::{NGramModel, StatelessModel};

    fn pair() -> (NGramModel, NGramModel) {
        let mut rng = Stream::new(11);
        let p = NGramModel::random(2, 6, 0.05, 2.0, &mut rng).unwrap();
        let q = NGramModel::random(2, 6, 0.05, 2.0, &mut rng).unwrap();
        (p, q)
    }

    fn contexts() -> Vec<Vec<TokenId>> {
        (0..3).map(|t| vec![TokenId(t)]).collect()
    }

    #[test]
    fn honest_engine_passes() {
        let (p, q) = pair();
        let config = SpecConfig::default().with_gamma(2).with_seed(1);
        let r = equivalence_test(&p, &q, &config, 20_000, &contexts(), 0.001).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.tests.len(), 3);
    }

    #[test]
    fn draft_as_residual_fails() {
        let (p, q) = pair();
        let config = SpecConfig::default()
            .with_gamma(2)
            .with_seed(1)
            .with_mutation(Mutation::DraftAsResidual);
        let r = equivalence_test(&p, &q, &config, 20_000, &contexts(), 0.001).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn same_model_tv_is_small() {
        let m = StatelessModel::new(Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap());
        let config = SpecConfig::default().with_seed(5);
        let r = equivalence_test(&m, &m, &config, 40_000, &[vec![TokenId(0)]], 0.001).unwrap();
        assert!(r.passed);
        assert!(r.max_tv < 0.02);
    }

    #[test]
    fn bonferroni_and_verdict() {
        let t = |p_value| ChiSquareResult { statistic: 0.0, df: 1, p_value };
        let r = EquivalenceReport::from_tests(vec![t(0.5), t(0.0004)], 0.0, 10, 0.001, None);
        assert!((r.combined_p_value - 0.0008).abs() < 1e-15);
        assert!(!r.passed);
        let r = EquivalenceReport::from_tests(vec![t(0.5), t(0.9)], 0.0, 10, 0.001, None);
        assert_eq!(r.combined_p_value, 1.0);
        assert!(r.passed);
    }

    #[test]
    fn too_few_samples() {
        let (p, q) = pair();
        assert!(equivalence_test(&p, &q, &SpecConfig::default(), 100, &contexts(), 0.001).is_err());
    }
}

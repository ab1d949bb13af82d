use serde::Serialize;

use super::equivalence::{EquivalenceReport, MeanCheck};
use super::stats::goodness_of_fit;
use super::HarnessError;
use crate::analysis::expected_tokens;
use crate::distmath::{Distribution, TokenId};
use crate::engine::{speculative_step, SpecConfig};
use crate::models::StatelessModel;
use crate::rng::Stream;

/// Allowed relative deviation of the mean tokens per step.
pub const MEAN_TOLERANCE: f64 = 0.02;

/// Law of tokens emitted per step when every draft is accepted independently
/// with probability `alpha`: entry `k - 1` holds `P(k)` for `k = 1..=gamma+1`.
pub fn capped_geometric_pmf(alpha: f64, gamma: usize) -> Vec<f64> {
    let mut pmf: Vec<f64> = (0..gamma).map(|k| (1.0 - alpha) * alpha.powi(k as i32)).collect();
    pmf.push(alpha.powi(gamma as i32));
    pmf
}

/// Two-token stateless pair whose acceptance rate is exactly `alpha`:
/// target `[alpha, 1 - alpha]`, draft always proposing token 0.
pub fn stateless_pair_for_alpha(alpha: f64) -> Result<(StatelessModel, StatelessModel), HarnessError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HarnessError::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let p = Distribution::new(vec![alpha, 1.0 - alpha])?;
    let q = Distribution::point(2, TokenId(0));
    Ok((StatelessModel::new(p), StatelessModel::new(q)))
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricHistogram {
    pub counts: Vec<u64>,
    pub mean: f64,
}

fn tokens_per_step(alpha: f64, gamma: usize, n_steps: usize, seed: u64) -> Result<GeometricHistogram, HarnessError> {
    let (p, q) = stateless_pair_for_alpha(alpha)?;
    let config = SpecConfig::default().with_gamma(gamma).with_seed(seed);
    let mut rng = Stream::new(seed);
    let mut counts = vec![0u64; gamma + 1];
    let prefix = [TokenId(0)];
    for _ in 0..n_steps {
        let (tokens, _) = speculative_step(&p, &q, &prefix, &config, &mut rng)?;
        counts[tokens.len() - 1] += 1;
    }
    let total: u64 = counts.iter().enumerate().map(|(k, &c)| (k as u64 + 1) * c).sum();
    Ok(GeometricHistogram { counts, mean: total as f64 / n_steps as f64 })
}

/// Runs `n_steps` speculative steps on [`stateless_pair_for_alpha`] and tests
/// the tokens-per-step histogram against [`capped_geometric_pmf`]. The verdict
/// also requires the sample mean to lie within 2% of the expected tokens per step.
pub fn geometric_fit_test(
    alpha: f64,
    gamma: usize,
    n_steps: usize,
    seed: u64,
    threshold: f64,
) -> Result<EquivalenceReport, HarnessError> {
    if gamma == 0 || n_steps == 0 {
        return Err(HarnessError::InvalidParameter("gamma and n_steps must be positive".into()));
    }
    let hist = tokens_per_step(alpha, gamma, n_steps, seed)?;
    let pmf = capped_geometric_pmf(alpha, gamma);
    let fit = goodness_of_fit(&hist.counts, &pmf);
    let mean = MeanCheck::new(hist.mean, expected_tokens(alpha, gamma)?, MEAN_TOLERANCE);
    let observed: Vec<f64> = hist.counts.iter().map(|&c| c as f64 / n_steps as f64).collect();
    let tv = 0.5 * observed.iter().zip(&pmf).map(|(o, e)| (o - e).abs()).sum::<f64>();
    Ok(EquivalenceReport::from_tests(vec![fit], tv, n_steps, threshold, Some(mean)))
}

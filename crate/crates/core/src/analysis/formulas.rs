use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distmath::{overlap, DistError, Distribution};
use crate::scalar::{KahanSum, Real};

pub const DEFAULT_GAMMA_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{name} = {value} outside its domain {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Timing and arithmetic cost ratios of the draft relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Draft-step time over target-step time.
    pub c: f64,
    /// Draft arithmetic per token over target arithmetic per token.
    pub c_hat: f64,
    /// Time of one (batched) target call.
    pub unit_cost: f64,
    /// Extra fraction of `unit_cost` per additional prefix in a batched
    /// target call; 0 models perfectly parallel verification.
    pub batch_penalty: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c: 0.0, c_hat: 0.0, unit_cost: 1.0, batch_penalty: 0.0 }
    }
}

impl CostModel {
    pub fn new(c: f64, c_hat: f64) -> Self {
        Self { c, c_hat, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        non_negative("c", self.c)?;
        non_negative("c_hat", self.c_hat)?;
        non_negative("batch_penalty", self.batch_penalty)?;
        if !(self.unit_cost.is_finite() && self.unit_cost > 0.0) {
            return Err(AnalysisError::Domain {
                name: "unit_cost",
                value: self.unit_cost,
                domain: "(0, inf)",
            });
        }
        Ok(())
    }

    pub fn step_cost(&self, target_calls: usize, target_prefixes: usize, draft_calls: usize) -> f64 {
        let extra_prefixes = target_prefixes.saturating_sub(target_calls) as f64;
        self.unit_cost
            * (target_calls as f64 + self.batch_penalty * extra_prefixes + self.c * draft_calls as f64)
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), AnalysisError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(AnalysisError::Domain { name, value: v, domain: "[0, inf)" })
    }
}

fn check_alpha<T: Real>(alpha: T) -> Result<(), AnalysisError> {
    if alpha.is_finite() && alpha >= T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(AnalysisError::Domain { name: "alpha", value: alpha.to_f64_lossy(), domain: "[0, 1]" })
    }
}

fn check_non_negative<T: Real>(name: &'static str, v: T) -> Result<(), AnalysisError> {
    non_negative(name, v.to_f64_lossy())
}

fn near_one<T: Real>(alpha: T) -> bool {
    (T::one() - alpha).abs() < T::lit(1e-12)
}

/// Acceptance probability of one speculative token, `sum_x min(p(x), q(x))`.
pub fn beta<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T, AnalysisError> {
    Ok(overlap(p, q)?)
}

/// Acceptance probability with lenience `l`: `sum_x min(p(x) / l, q(x))`.
pub fn lenient_alpha<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    lenience: T,
) -> Result<T, AnalysisError> {
    if !(lenience > T::zero() && lenience <= T::one()) {
        return Err(AnalysisError::Domain {
            name: "lenience",
            value: lenience.to_f64_lossy(),
            domain: "(0, 1]",
        });
    }
    if p.len() != q.len() {
        return Err(DistError::VocabMismatch { left: p.len(), right: q.len() }.into());
    }
    let sum = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| (a / lenience).min(b))
        .collect::<KahanSum<T>>()
        .total();
    Ok(sum.min(T::one()))
}

/// Expected tokens per step for i.i.d. acceptance: `(1 - alpha^(gamma+1)) / (1 - alpha)`,
/// and `gamma + 1` at `alpha = 1`.
pub fn expected_tokens<T: Real>(alpha: T, gamma: usize) -> Result<T, AnalysisError> {
    check_alpha(alpha)?;
    let g1 = T::from_usize_lossy(gamma + 1);
    if near_one(alpha) {
        return Ok(g1);
    }
    Ok((T::one() - alpha.powi(gamma as i32 + 1)) / (T::one() - alpha))
}

/// Expected walltime speedup over plain decoding with draft cost ratio `c`.
pub fn walltime_factor<T: Real>(alpha: T, gamma: usize, c: T) -> Result<T, AnalysisError> {
    check_non_negative("c", c)?;
    let tokens = expected_tokens(alpha, gamma)?;
    Ok(tokens / (T::from_usize_lossy(gamma) * c + T::one()))
}

/// Expected factor of increase in total arithmetic operations.
pub fn ops_factor<T: Real>(alpha: T, gamma: usize, c_hat: T) -> Result<T, AnalysisError> {
    check_non_negative("c_hat", c_hat)?;
    let g = T::from_usize_lossy(gamma);
    let tokens = expected_tokens(alpha, gamma)?;
    Ok((g * c_hat + g + T::one()) / tokens)
}

/// Reduction factor in target weight/KV reads: one read per step.
pub fn memory_access_factor<T: Real>(alpha: T, gamma: usize) -> Result<T, AnalysisError> {
    expected_tokens(alpha, gamma)
}

/// Upper bound on expected tokens per step when the ideal `gamma` is known
/// for every step: `1 / (1 - alpha)`.
pub fn oracle_gamma_bound<T: Real>(alpha: T) -> Result<T, AnalysisError> {
    check_alpha(alpha)?;
    if near_one(alpha) {
        return Err(AnalysisError::Domain {
            name: "alpha",
            value: alpha.to_f64_lossy(),
            domain: "[0, 1)",
        });
    }
    Ok(T::one() / (T::one() - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement<T> {
    /// Some `gamma >= 1` beats plain decoding.
    pub improves: bool,
    /// Speedup at `gamma = 1`: `(1 + alpha) / (1 + c)`.
    pub floor: T,
}

pub fn improvement_condition<T: Real>(alpha: T, c: T) -> Result<Improvement<T>, AnalysisError> {
    check_alpha(alpha)?;
    check_non_negative("c", c)?;
    Ok(Improvement { improves: alpha > c, floor: (T::one() + alpha) / (T::one() + c) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalGamma<T> {
    pub gamma: usize,
    pub factor: T,
    /// The scan hit `gamma_max` (always the case for `c = 0`, where the
    /// factor grows without a maximum).
    pub saturated: bool,
}

/// Walltime-optimal `gamma` by exhaustive scan over `0..=gamma_max`, smallest
/// on ties. `gamma = 0` (factor 1) means speculation does not pay off.
pub fn optimal_gamma<T: Real>(
    alpha: T,
    c: T,
    gamma_max: usize,
) -> Result<OptimalGamma<T>, AnalysisError> {
    check_alpha(alpha)?;
    check_non_negative("c", c)?;
    if gamma_max == 0 {
        return Err(AnalysisError::Domain { name: "gamma_max", value: 0.0, domain: "[1, inf)" });
    }
    if c == T::zero() && alpha > T::zero() {
        return Ok(OptimalGamma {
            gamma: gamma_max,
            factor: walltime_factor(alpha, gamma_max, c)?,
            saturated: true,
        });
    }
    let mut best = OptimalGamma { gamma: 0, factor: T::one(), saturated: false };
    for gamma in 1..=gamma_max {
        let f = walltime_factor(alpha, gamma, c)?;
        if f > best.factor {
            best.gamma = gamma;
            best.factor = f;
        }
    }
    best.saturated = best.gamma == gamma_max;
    Ok(best)
}

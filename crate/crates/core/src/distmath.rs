//! Probability-vector arithmetic.
//!
//! Every sampling policy (argmax, temperature, top-k, nucleus) is reduced to
//! plain sampling from an adjusted [`Distribution`]; the speculative engine
//! only ever sees the adjusted vectors. The residual distribution used on
//! rejection and the `D_LK` divergence also live here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;
use crate::scalar::{KahanSum, Real};

/// Index into a model vocabulary.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        TokenId(u32::try_from(i).expect("token index exceeds u32"))
    }
}

impl std::fmt::Display for TokenId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("vector sums to zero")]
    AllZero,
    #[error("negative entry at index {index}")]
    NegativeEntry { index: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("entries sum to {sum}, too far from 1 to renormalize")]
    NotNormalized { sum: f64 },
    #[error("empty probability vector")]
    Empty,
    #[error("vocabulary sizes differ: {left} vs {right}")]
    VocabMismatch { left: usize, right: usize },
    #[error("argmax cannot be combined with temperature, top-k or top-p")]
    PolicyConflict,
    #[error("invalid sampling policy: {0}")]
    InvalidPolicy(String),
}

/// Dense probability vector over a finite vocabulary.
///
/// Entries are non-negative and sum to one. Construction from an almost
/// normalized vector (|sum - 1| within [`Real::renorm_tolerance`]) silently
/// renormalizes; anything further off is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self, DistError> {
        let sum = checked_sum(&probs)?;
        if (sum - T::one()).abs() > T::renorm_tolerance() {
            return Err(DistError::NotNormalized { sum: sum.to_f64_lossy() });
        }
        Ok(Self::scaled(probs, sum))
    }

    pub fn uniform(vocab_size: usize) -> Self {
        assert!(vocab_size > 0, "uniform distribution over an empty vocabulary");
        let v = T::one() / T::from_usize_lossy(vocab_size);
        Self { probs: vec![v; vocab_size] }
    }

    /// All mass on one token.
    pub fn point(vocab_size: usize, token: TokenId) -> Self {
        let mut probs = vec![T::zero(); vocab_size];
        probs[token.index()] = T::one();
        Self { probs }
    }

    fn scaled(mut probs: Vec<T>, sum: T) -> Self {
        if sum != T::one() {
            for p in &mut probs {
                *p = *p / sum;
            }
        }
        Self { probs }
    }

    #[inline]
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn prob(&self, token: TokenId) -> T {
        self.probs[token.index()]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    /// Largest entry (first one on ties).
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        TokenId::from_index(best)
    }

    pub fn max_prob(&self) -> T {
        self.probs.iter().copied().fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> Distribution<U> {
        Distribution { probs: self.probs.iter().map(|p| U::lit(p.to_f64_lossy())).collect() }
    }
}

fn checked_sum<T: Real>(raw: &[T]) -> Result<T, DistError> {
    if raw.is_empty() {
        return Err(DistError::Empty);
    }
    let mut acc = KahanSum::new();
    for (index, &v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(DistError::NonFinite { index });
        }
        if v < T::zero() {
            return Err(DistError::NegativeEntry { index });
        }
        acc.add(v);
    }
    Ok(acc.total())
}

/// `raw / sum(raw)` for a non-negative vector.
pub fn normalize<T: Real>(raw: &[T]) -> Result<Distribution<T>, DistError> {
    let sum = checked_sum(raw)?;
    if sum <= T::zero() {
        return Err(DistError::AllZero);
    }
    Ok(Distribution::scaled(raw.to_vec(), sum))
}

/// How a model's raw score vector should be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Logits,
    /// Non-negative weights, not necessarily normalized.
    #[default]
    Probabilities,
}

/// Sampling method, expressed as a transform of the model distribution.
///
/// `temperature == 0` is treated as argmax. Temperature on probability
/// inputs is applied as `p^(1/t)` followed by renormalization, which equals
/// softmax-with-temperature on the corresponding log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub top_p: Option<f64>,
    pub argmax: bool,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self::standard()
    }
}

impl SamplingPolicy {
    /// Plain sampling from the model distribution (temperature 1).
    pub const fn standard() -> Self {
        Self { temperature: 1.0, top_k: None, top_p: None, argmax: false }
    }

    pub const fn argmax() -> Self {
        Self { temperature: 1.0, top_k: None, top_p: None, argmax: true }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = Some(k);
        self
    }

    pub fn with_top_p(mut self, p: f64) -> Self {
        self.top_p = Some(p);
        self
    }

    pub fn is_argmax(&self) -> bool {
        self.argmax || self.temperature == 0.0
    }

    pub fn validate(&self, vocab_size: usize) -> Result<(), DistError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(DistError::InvalidPolicy(format!(
                "temperature must be a non-negative finite number, got {}",
                self.temperature
            )));
        }
        if self.argmax && (self.temperature != 1.0 && self.temperature != 0.0) {
            return Err(DistError::PolicyConflict);
        }
        if self.is_argmax() && (self.top_k.is_some() || self.top_p.is_some()) {
            return Err(DistError::PolicyConflict);
        }
        if let Some(k) = self.top_k {
            if k == 0 || k > vocab_size {
                return Err(DistError::InvalidPolicy(format!(
                    "top_k must be in 1..={vocab_size}, got {k}"
                )));
            }
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(DistError::InvalidPolicy(format!("top_p must be in (0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Reduces `scores` under `policy` to the distribution that is actually sampled.
///
/// Composition order is fixed: temperature, then top-k, then top-p.
pub fn standardize<T: Real>(
    scores: &[T],
    kind: ScoreKind,
    policy: &SamplingPolicy,
) -> Result<Distribution<T>, DistError> {
    policy.validate(scores.len())?;
    if scores.is_empty() {
        return Err(DistError::Empty);
    }
    if policy.is_argmax() {
        return argmax_distribution(scores, kind);
    }

    let mut probs = match kind {
        ScoreKind::Logits => softmax(scores, T::lit(policy.temperature))?,
        ScoreKind::Probabilities => {
            let base = normalize(scores)?;
            if policy.temperature == 1.0 {
                base
            } else {
                sharpen(base.probs(), T::lit(policy.temperature))?
            }
        }
    }
    .into_vec();

    if let Some(k) = policy.top_k {
        let order = descending_order(&probs);
        for &i in &order[k..] {
            probs[i] = T::zero();
        }
    }
    if let Some(top_p) = policy.top_p {
        let total = probs.iter().copied().collect::<KahanSum<T>>().total();
        let target = T::lit(top_p) * total;
        let order = descending_order(&probs);
        let mut cumulative = T::zero();
        let mut keep = order.len();
        for (rank, &i) in order.iter().enumerate() {
            cumulative = cumulative + probs[i];
            // Absolute slack absorbs rounding in the running sum (0.5 + 0.3 vs 0.8).
            if cumulative >= target - T::lit(1e-12) {
                keep = rank + 1;
                break;
            }
        }
        for &i in &order[keep..] {
            probs[i] = T::zero();
        }
    }
    normalize(&probs)
}

fn argmax_distribution<T: Real>(scores: &[T], kind: ScoreKind) -> Result<Distribution<T>, DistError> {
    for (index, &s) in scores.iter().enumerate() {
        if s.is_nan() || (kind == ScoreKind::Probabilities && !s.is_finite()) {
            return Err(DistError::NonFinite { index });
        }
        if kind == ScoreKind::Probabilities && s < T::zero() {
            return Err(DistError::NegativeEntry { index });
        }
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let ties = scores.iter().filter(|&&s| s == max).count();
    let mass = T::one() / T::from_usize_lossy(ties);
    let probs = scores.iter().map(|&s| if s == max { mass } else { T::zero() }).collect();
    Ok(Distribution { probs })
}

fn softmax<T: Real>(logits: &[T], temperature: T) -> Result<Distribution<T>, DistError> {
    for (index, &s) in logits.iter().enumerate() {
        if s.is_nan() || s == T::infinity() {
            return Err(DistError::NonFinite { index });
        }
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(DistError::AllZero);
    }
    let weights: Vec<T> = logits.iter().map(|&s| ((s - max) / temperature).exp()).collect();
    normalize(&weights)
}

/// `p^(1/t)` renormalized, computed in the log domain relative to the max.
fn sharpen<T: Real>(probs: &[T], temperature: T) -> Result<Distribution<T>, DistError> {
    let max = probs.iter().copied().fold(T::zero(), T::max);
    let log_max = max.ln();
    let weights: Vec<T> = probs
        .iter()
        .map(|&p| if p > T::zero() { ((p.ln() - log_max) / temperature).exp() } else { T::zero() })
        .collect();
    normalize(&weights)
}

/// Indices sorted by value descending; equal values keep index order.
fn descending_order<T: Real>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Inverse-CDF sampling with exactly one uniform variate from `rng`.
pub fn sample<T: Real>(d: &Distribution<T>, rng: &mut Stream) -> TokenId {
    sample_with_variate(d, rng.uniform())
}

/// Inverse-CDF lookup for a given variate in `[0, 1)`.
pub fn sample_with_variate<T: Real>(d: &Distribution<T>, u: f64) -> TokenId {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in d.probs().iter().enumerate() {
        let p = p.to_f64_lossy();
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if u < cumulative {
                return TokenId::from_index(i);
            }
        }
    }
    // Only reachable when rounding leaves the cumulative sum just under 1.
    TokenId::from_index(last_positive)
}

fn check_same_vocab<T>(p: &Distribution<T>, q: &Distribution<T>) -> Result<(), DistError> {
    if p.probs.len() != q.probs.len() {
        return Err(DistError::VocabMismatch { left: p.probs.len(), right: q.probs.len() });
    }
    Ok(())
}

/// `norm(max(0, p - lenience * q))`, the distribution sampled after a rejection.
///
/// Returns [`DistError::AllZero`] when `p <= lenience * q` everywhere, i.e.
/// when a rejection cannot happen.
pub fn residual<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    lenience: T,
) -> Result<Distribution<T>, DistError> {
    check_same_vocab(p, q)?;
    let raw: Vec<T> =
        p.probs.iter().zip(&q.probs).map(|(&a, &b)| (a - lenience * b).max(T::zero())).collect();
    normalize(&raw)
}

/// `D_LK(p, q) = 1 - sum_x min(p(x), q(x))`.
pub fn dlk<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T, DistError> {
    Ok((T::one() - overlap(p, q)?).max(T::zero()).min(T::one()))
}

/// `sum_x min(p(x), q(x))`.
pub fn overlap<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T, DistError> {
    check_same_vocab(p, q)?;
    Ok(p.probs.iter().zip(&q.probs).map(|(&a, &b)| a.min(b)).collect::<KahanSum<T>>().total())
}

/// `D_LK` through its definition: `sum_x |p(x) - m(x)|` with `m = (p + q) / 2`.
pub fn dlk_midpoint_form<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T, DistError> {
    check_same_vocab(p, q)?;
    let half = T::lit(0.5);
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| (a - (a + b) * half).abs())
        .collect::<KahanSum<T>>()
        .total())
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::lenient_alpha;
use crate::distmath::{standardize, SamplingPolicy, TokenId};
use crate::engine::{standard_decode, EngineError, SpecConfig};
use crate::models::LanguageModel;
use crate::scalar::KahanSum;

/// Mean per-position acceptance probability with its normal-approximation
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub n_tokens: usize,
    pub std_error: f64,
}

impl AlphaEstimate {
    fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().copied().collect::<KahanSum<f64>>().total() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).collect::<KahanSum<f64>>().total()
                / (n - 1) as f64
        } else {
            0.0
        };
        Self { alpha: mean.clamp(0.0, 1.0), n_tokens: n, std_error: (var / n as f64).sqrt() }
    }
}

fn position_betas<P, Q>(
    target: &P,
    draft: &Q,
    context: &[TokenId],
    continuation: &[TokenId],
    policy: &SamplingPolicy,
    lenience: f64,
) -> Result<Vec<f64>, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    let mut prefix = context.to_vec();
    let mut out = Vec::with_capacity(continuation.len());
    for &tok in continuation {
        let p = standardize(&target.evaluate(&prefix), target.score_kind(), policy)?;
        let q = standardize(&draft.evaluate(&prefix), draft.score_kind(), policy)?;
        out.push(lenient_alpha(&p, &q, lenience).map_err(|e| EngineError::InvalidConfig(e.to_string()))?);
        prefix.push(tok);
    }
    Ok(out)
}

/// Estimates alpha on text generated by the target itself, split as evenly
/// as possible across `prompts`.
pub fn estimate_alpha<P, Q>(
    target: &P,
    draft: &Q,
    prompts: &[Vec<TokenId>],
    n_tokens: usize,
    policy: &SamplingPolicy,
    seed: u64,
) -> Result<AlphaEstimate, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    estimate_lenient_alpha(target, draft, prompts, n_tokens, policy, 1.0, seed)
}

/// [`estimate_alpha`] with the lenient acceptance rule.
pub fn estimate_lenient_alpha<P, Q>(
    target: &P,
    draft: &Q,
    prompts: &[Vec<TokenId>],
    n_tokens: usize,
    policy: &SamplingPolicy,
    lenience: f64,
    seed: u64,
) -> Result<AlphaEstimate, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    if n_tokens == 0 {
        return Err(EngineError::InvalidConfig("n_tokens must be at least 1".into()));
    }
    if target.vocab_size() != draft.vocab_size() {
        return Err(EngineError::VocabMismatch {
            target: target.vocab_size(),
            draft: draft.vocab_size(),
        });
    }
    let default_prompt = [Vec::new()];
    let prompts: &[Vec<TokenId>] = if prompts.is_empty() { &default_prompt } else { prompts };
    let k = prompts.len();
    let shards: Vec<Vec<f64>> = prompts
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| {
            let budget = n_tokens / k + usize::from(i < n_tokens % k);
            if budget == 0 {
                return Ok(Vec::new());
            }
            let config = SpecConfig {
                policy: *policy,
                seed: seed.wrapping_add(i as u64),
                max_new_tokens: budget,
                ..SpecConfig::default()
            };
            let generated = standard_decode(target, prompt, &config)?;
            position_betas(target, draft, &generated.prompt, &generated.tokens, policy, lenience)
        })
        .collect::<Result<_, EngineError>>()?;
    let all: Vec<f64> = shards.into_iter().flatten().collect();
    Ok(AlphaEstimate::from_samples(&all))
}

/// Alpha scored on a fixed token sequence instead of target samples: every
/// position after the first is scored with its preceding tokens as context.
pub fn estimate_alpha_on_corpus<P, Q>(
    target: &P,
    draft: &Q,
    corpus: &[TokenId],
    policy: &SamplingPolicy,
    lenience: f64,
) -> Result<AlphaEstimate, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    if corpus.len() < 2 {
        return Err(EngineError::InvalidConfig("corpus needs at least two tokens".into()));
    }
    let values = position_betas(target, draft, &corpus[..1], &corpus[1..], policy, lenience)?;
    Ok(AlphaEstimate::from_samples(&values))
}

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analysis::beta;
use crate::distmath::{standardize, Distribution, SamplingPolicy, TokenId};
use crate::engine::rejection_accept_probability;
use crate::models::LanguageModel;

/// Acceptance probabilities of speculative sampling and of plain rejection
/// sampling for the same `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub speculative: f64,
    pub rejection: f64,
    /// `rejection <= speculative` up to rounding.
    pub ordered: bool,
}

impl RejectionRow {
    pub fn from_pair(p: &Distribution<f64>, q: &Distribution<f64>) -> Result<Self, HarnessError> {
        let speculative = beta(p, q)?;
        let rejection = rejection_accept_probability(p, q);
        Ok(RejectionRow { speculative, rejection, ordered: rejection <= speculative + 1e-12 })
    }
}

/// One row per context, comparing the two samplers' acceptance probabilities.
pub fn rejection_comparison<P, Q>(
    target: &P,
    draft: &Q,
    contexts: &[Vec<TokenId>],
    policy: &SamplingPolicy,
) -> Result<Vec<RejectionRow>, HarnessError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    if target.vocab_size() != draft.vocab_size() {
        return Err(crate::engine::EngineError::VocabMismatch {
            target: target.vocab_size(),
            draft: draft.vocab_size(),
        }
        .into());
    }
    contexts
        .iter()
        .map(|ctx| {
            let p = standardize(&target.evaluate(ctx), target.score_kind(), policy)?;
            let q = standardize(&draft.evaluate(ctx), draft.score_kind(), policy)?;
            RejectionRow::from_pair(&p, &q)
        })
        .collect()
}

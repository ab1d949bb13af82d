use super::HarnessError;
use crate::distmath::{residual, DistError, Distribution};
use crate::scalar::{KahanSum, Real};

pub const EXACT_VOCAB_LIMIT: usize = 4096;

/// Output distribution of the first token of a speculative step, by
/// enumeration instead of sampling.
///
/// `P(x) = P(draft x, accepted) + P(rejected) * residual(x)` with
/// `P(draft x, accepted) = q(x) * min(1, p(x) / (l q(x))) = min(q(x), p(x) / l)`.
/// At `l = 1` this is `p` exactly.
pub fn exact_step_distribution<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    lenience: T,
) -> Result<Distribution<T>, HarnessError> {
    if p.len() > EXACT_VOCAB_LIMIT {
        return Err(HarnessError::VocabTooLarge(p.len()));
    }
    if p.len() != q.len() {
        return Err(DistError::VocabMismatch { left: p.len(), right: q.len() }.into());
    }
    if !(lenience > T::zero() && lenience <= T::one()) {
        return Err(HarnessError::InvalidParameter(format!("lenience {lenience} not in (0, 1]")));
    }
    let accepted: Vec<T> =
        p.probs().iter().zip(q.probs()).map(|(&px, &qx)| qx.min(px / lenience)).collect();
    let accept_total = accepted.iter().copied().collect::<KahanSum<T>>().total();
    let reject = (T::one() - accept_total).max(T::zero());
    let out = match residual(p, q, lenience) {
        Ok(r) => accepted.iter().zip(r.probs()).map(|(&a, &rx)| a + reject * rx).collect(),
        // Rejection has probability ~0; all mass is on accepted drafts.
        Err(DistError::AllZero) => accepted,
        Err(e) => return Err(e.into()),
    };
    Ok(Distribution::new(out)?)
}

use super::config::EngineError;
use crate::distmath::{sample, standardize, Distribution, SamplingPolicy, TokenId};
use crate::models::LanguageModel;
use crate::rng::Stream;

/// `max p(x) / q(x)` over the support of `q`.
fn envelope(p: &Distribution<f64>, q: &Distribution<f64>) -> f64 {
    p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(_, &qx)| qx > 0.0)
        .map(|(&px, &qx)| px / qx)
        .fold(0.0, f64::max)
}

/// Probability that one round of the non-iterative rejection sampler accepts
/// its proposal: `sum_{x: q(x) > 0} p(x) / M` with `M = max p/q` on q's support.
pub fn rejection_accept_probability(p: &Distribution<f64>, q: &Distribution<f64>) -> f64 {
    let m = envelope(p, q);
    if m == 0.0 {
        return 0.0;
    }
    let covered: f64 =
        p.probs().iter().zip(q.probs()).filter(|(_, &qx)| qx > 0.0).map(|(&px, _)| px).sum();
    covered / m
}

/// One round of rejection sampling with a fallback to exact sampling from `p`.
/// Returns the token and whether the proposal was accepted.
pub fn rejection_sample(
    p: &Distribution<f64>,
    q: &Distribution<f64>,
    rng: &mut Stream,
) -> (TokenId, bool) {
    let m = envelope(p, q);
    let x = sample(q, rng);
    let r = rng.uniform();
    if m > 0.0 && r < p.prob(x) / (m * q.prob(x)) {
        (x, true)
    } else {
        (sample(p, rng), false)
    }
}

/// Rejection-sampling baseline for one position. Exact for `p` whenever `q`
/// covers the support of `p`.
pub fn rejection_baseline_step<P, Q>(
    target: &P,
    draft: &Q,
    prefix: &[TokenId],
    policy: &SamplingPolicy,
    rng: &mut Stream,
) -> Result<TokenId, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    if target.vocab_size() != draft.vocab_size() {
        return Err(EngineError::VocabMismatch {
            target: target.vocab_size(),
            draft: draft.vocab_size(),
        });
    }
    let p = standardize(&target.evaluate(prefix), target.score_kind(), policy)?;
    let q = standardize(&draft.evaluate(prefix), draft.score_kind(), policy)?;
    Ok(rejection_sample(&p, &q, rng).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::overlap;

    fn d(v: &[f64]) -> Distribution<f64> {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_always_accepts() {
        let p = d(&[0.3, 0.7]);
        assert!((rejection_accept_probability(&p, &p) - 1.0).abs() < 1e-15);
        let mut rng = Stream::new(1);
        assert!((0..100).all(|_| rejection_sample(&p, &p, &mut rng).1));
    }

    #[test]
    fn hand_example() {
        let p = d(&[0.8, 0.2]);
        let q = d(&[0.5, 0.5]);
        assert!((rejection_accept_probability(&p, &q) - 0.625).abs() < 1e-15);
        assert!((overlap(&p, &q).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn output_frequencies_match_target() {
        let p = d(&[0.8, 0.15, 0.05]);
        let q = d(&[0.2, 0.3, 0.5]);
        let mut rng = Stream::new(5);
        let n = 400_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[rejection_sample(&p, &q, &mut rng).0.index()] += 1;
        }
        for (c, &px) in counts.iter().zip(p.probs()) {
            let sigma = (n as f64 * px * (1.0 - px)).sqrt();
            assert!((*c as f64 - n as f64 * px).abs() < 4.0 * sigma);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::config::{EngineError, Mutation, SpecConfig};
use crate::analysis::CostModel;
use crate::distmath::{
    residual, sample, sample_with_variate, standardize, DistError, Distribution, SamplingPolicy,
    ScoreKind, TokenId,
};
use crate::models::LanguageModel;
use crate::rng::Stream;
use crate::scalar::Real;

/// One drafted token with the probabilities both models assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftRecord {
    pub token: TokenId,
    pub q_prob: f64,
    pub p_prob: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionSource {
    /// Sampled from the residual after rejecting a draft.
    Residual,
    /// Sampled from the target's own distribution: every draft was accepted,
    /// or the step is a plain autoregressive one.
    Target,
    /// Residual was numerically empty, so the rejected draft was kept.
    DraftFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub token: TokenId,
    pub source: CorrectionSource,
}

/// Record of one decoding iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub drafted: Vec<DraftRecord>,
    pub accepted_n: usize,
    pub correction: Correction,
    /// Batched target invocations (always 1).
    pub target_calls: usize,
    /// Prefixes scored by the batched target call.
    pub target_prefixes: usize,
    pub draft_calls: usize,
    /// Tokens of this step kept in the final output (less than
    /// `accepted_n + 1` only when a stop token or the token budget cut it).
    pub kept: usize,
}

impl StepTrace {
    pub fn emitted(&self) -> usize {
        self.accepted_n + 1
    }

    /// Accepted drafts followed by the correction.
    pub fn tokens(&self) -> Vec<TokenId> {
        self.drafted[..self.accepted_n]
            .iter()
            .map(|d| d.token)
            .chain(std::iter::once(self.correction.token))
            .collect()
    }

    /// Acceptance tests performed: the accepted drafts plus the rejected one, if any.
    pub fn acceptance_trials(&self) -> usize {
        self.accepted_n + usize::from(self.accepted_n < self.drafted.len())
    }

    /// Simulated cost: `T` per batched target call and `c * T` per draft call.
    pub fn cost(&self, cost: &CostModel) -> f64 {
        cost.step_cost(self.target_calls, self.target_prefixes, self.draft_calls)
    }
}

/// Lenient acceptance for argmax decoding: keep `draft` when its target
/// probability is at least `lenience` times the target's maximum.
///
/// The comparison is `>=`; the opposite direction would accept only
/// low-probability tokens and lower the acceptance rate as lenience shrinks.
pub fn argmax_lenient_accept<T: Real>(p: &Distribution<T>, draft: TokenId, lenience: T) -> bool {
    p.prob(draft) >= lenience * p.max_prob()
}

fn plain(scores: &[f64], kind: ScoreKind) -> Result<Distribution<f64>, DistError> {
    standardize(scores, kind, &SamplingPolicy::standard())
}

/// One draft-then-verify iteration.
///
/// Draws `gamma` tokens from the draft model, scores all `gamma + 1` prefixes
/// with one batched target call, accepts drafts left to right while
/// `r_i <= p_i(x_i) / (l * q_i(x_i))`, and appends one token from the residual
/// (after a rejection) or from the target (after accepting everything).
///
/// Variates are always consumed in the same order: `gamma` draft samples,
/// `gamma` acceptance uniforms (drawn even past the first rejection), one
/// final sample. The stream position after a step is therefore independent
/// of how many drafts were accepted.
pub fn speculative_step<P, Q>(
    target: &P,
    draft: &Q,
    prefix: &[TokenId],
    config: &SpecConfig,
    rng: &mut Stream,
) -> Result<(Vec<TokenId>, StepTrace), EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    let vocab = target.vocab_size();
    if draft.vocab_size() != vocab {
        return Err(EngineError::VocabMismatch { target: vocab, draft: draft.vocab_size() });
    }
    config.validate(vocab)?;
    let gamma = config.gamma;
    let policy = &config.policy;
    let lenience = config.lenience;
    let argmax_lenient = policy.is_argmax() && lenience < 1.0;

    let mut context = Vec::with_capacity(prefix.len() + gamma);
    context.extend_from_slice(prefix);
    let mut qs = Vec::with_capacity(gamma);
    for _ in 0..gamma {
        let q = standardize(&draft.evaluate(&context), draft.score_kind(), policy)?;
        let x = sample(&q, rng);
        context.push(x);
        qs.push(q);
    }
    let drafts = &context[prefix.len()..];

    let prefixes: Vec<Vec<TokenId>> =
        (0..=gamma).map(|i| context[..prefix.len() + i].to_vec()).collect();
    let raw = target.evaluate_batch(&prefixes);
    if raw.len() != gamma + 1 {
        return Err(EngineError::BatchSize { expected: gamma + 1, got: raw.len() });
    }
    let ps = raw
        .iter()
        .map(|s| standardize(s, target.score_kind(), policy))
        .collect::<Result<Vec<_>, _>>()?;
    let plain_ps = if argmax_lenient {
        raw.iter().map(|s| plain(s, target.score_kind())).collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    let rs: Vec<f64> = (0..gamma).map(|_| rng.uniform()).collect();
    let mut accepted_n = gamma;
    for i in 0..gamma {
        let x = drafts[i];
        let accept = if argmax_lenient {
            argmax_lenient_accept(&plain_ps[i], x, lenience)
        } else {
            let p_idx = if config.mutation == Mutation::OffByOneAcceptance { i + 1 } else { i };
            let q_x = qs[i].prob(x);
            assert!(q_x > 0.0, "draft token sampled with zero probability");
            !(rs[i] > ps[p_idx].prob(x) / (lenience * q_x))
        };
        if !accept {
            accepted_n = i;
            break;
        }
    }

    let final_variate = rng.uniform();
    let correction = if accepted_n < gamma {
        let n = accepted_n;
        let residual_lenience = if argmax_lenient { 1.0 } else { lenience };
        let adjusted = match config.mutation {
            Mutation::SkipResidual => Ok(ps[n].clone()),
            Mutation::DraftAsResidual => Ok(qs[n].clone()),
            _ => residual(&ps[n], &qs[n], residual_lenience),
        };
        match adjusted {
            Ok(d) => Correction {
                token: sample_with_variate(&d, final_variate),
                source: CorrectionSource::Residual,
            },
            Err(DistError::AllZero) => {
                Correction { token: drafts[n], source: CorrectionSource::DraftFallback }
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        Correction {
            token: sample_with_variate(&ps[gamma], final_variate),
            source: CorrectionSource::Target,
        }
    };

    let drafted = drafts
        .iter()
        .enumerate()
        .map(|(i, &token)| DraftRecord {
            token,
            q_prob: qs[i].prob(token),
            p_prob: ps[i].prob(token),
            accepted: i < accepted_n,
        })
        .collect();
    let mut out = drafts[..accepted_n].to_vec();
    out.push(correction.token);
    let trace = StepTrace {
        drafted,
        accepted_n,
        correction,
        target_calls: 1,
        target_prefixes: gamma + 1,
        draft_calls: gamma,
        kept: out.len(),
    };
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::StatelessModel;

    fn stateless(v: &[f64]) -> StatelessModel {
        StatelessModel::new(Distribution::new(v.to_vec()).unwrap())
    }

    #[test]
    fn identical_models_accept_everything() {
        let m = stateless(&[0.2, 0.5, 0.3]);
        let cfg = SpecConfig::default().with_gamma(5);
        let mut rng = Stream::new(1);
        for _ in 0..200 {
            let (out, trace) = speculative_step(&m, &m, &[TokenId(0)], &cfg, &mut rng).unwrap();
            assert_eq!(out.len(), 6);
            assert_eq!(trace.accepted_n, 5);
            assert_eq!(trace.correction.source, CorrectionSource::Target);
        }
    }

    #[test]
    fn disjoint_support_always_rejects() {
        let p = stateless(&[1.0, 0.0]);
        let q = stateless(&[0.0, 1.0]);
        let cfg = SpecConfig::default().with_gamma(3);
        let mut rng = Stream::new(2);
        for _ in 0..100 {
            let (out, trace) = speculative_step(&p, &q, &[], &cfg, &mut rng).unwrap();
            assert_eq!(out, vec![TokenId(0)]);
            assert_eq!(trace.accepted_n, 0);
            assert_eq!(trace.correction.source, CorrectionSource::Residual);
            assert!(!trace.drafted[0].accepted);
        }
    }

    #[test]
    fn fixed_variate_consumption() {
        let p = stateless(&[0.6, 0.4]);
        let q = stateless(&[0.1, 0.9]);
        for gamma in 1..6 {
            let cfg = SpecConfig::default().with_gamma(gamma);
            let mut rng = Stream::new(gamma as u64);
            for k in 1..=50u64 {
                speculative_step(&p, &q, &[], &cfg, &mut rng).unwrap();
                assert_eq!(rng.variates_drawn(), k * (2 * gamma as u64 + 1));
            }
        }
    }

    #[test]
    fn vocab_mismatch() {
        let p = stateless(&[0.5, 0.5]);
        let q = stateless(&[0.2, 0.3, 0.5]);
        let err = speculative_step(&p, &q, &[], &SpecConfig::default(), &mut Stream::new(0));
        assert!(matches!(err, Err(EngineError::VocabMismatch { target: 2, draft: 3 })));
    }

    #[test]
    fn argmax_lenience_examples() {
        let p = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        assert!(argmax_lenient_accept(&p, TokenId(1), 0.5));
        assert!(!argmax_lenient_accept(&p, TokenId(1), 0.51));
        assert!(argmax_lenient_accept(&p, TokenId(0), 1.0));
        assert!(!argmax_lenient_accept(&p, TokenId(2), 1.0));
        assert!(argmax_lenient_accept(&p, TokenId(2), 1e-9));
        let ties = Distribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert!(argmax_lenient_accept(&ties, TokenId(1), 1.0));
    }

    #[test]
    fn argmax_lenient_step_accepts_near_max() {
        // target prefers 0 (0.6) over 1 (0.4); draft argmax is 1.
        let p = stateless(&[0.6, 0.4]);
        let q = stateless(&[0.3, 0.7]);
        let strict = SpecConfig::default().with_gamma(2).with_policy(SamplingPolicy::argmax());
        let (out, trace) = speculative_step(&p, &q, &[], &strict, &mut Stream::new(3)).unwrap();
        assert_eq!(trace.accepted_n, 0);
        assert_eq!(out, vec![TokenId(0)]);
        let lenient = strict.clone().with_lenience(0.5);
        let (out, trace) = speculative_step(&p, &q, &[], &lenient, &mut Stream::new(3)).unwrap();
        assert_eq!(trace.accepted_n, 2);
        assert_eq!(out, vec![TokenId(1), TokenId(1), TokenId(0)]);
    }

    #[test]
    fn trace_tokens_match_output() {
        let p = stateless(&[0.5, 0.3, 0.2]);
        let q = stateless(&[0.2, 0.2, 0.6]);
        let cfg = SpecConfig::default().with_gamma(4);
        let mut rng = Stream::new(77);
        for _ in 0..100 {
            let (out, trace) = speculative_step(&p, &q, &[], &cfg, &mut rng).unwrap();
            assert_eq!(out, trace.tokens());
            assert_eq!(out.len(), trace.emitted());
            assert_eq!(trace.target_calls, 1);
            assert_eq!(trace.target_prefixes, 5);
        }
    }
}

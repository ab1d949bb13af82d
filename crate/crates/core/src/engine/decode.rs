use serde::{Deserialize, Serialize};

use super::config::{EngineError, SpecConfig};
use super::step::{speculative_step, Correction, CorrectionSource, StepTrace};
use crate::distmath::{sample, standardize, TokenId};
use crate::models::LanguageModel;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodeTotals {
    /// Batched (serial) target invocations.
    pub target_calls: usize,
    /// Prefixes scored across all target invocations.
    pub target_prefixes: usize,
    pub draft_calls: usize,
    pub tokens_emitted: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Context the generation started from (after BOS injection).
    pub prompt: Vec<TokenId>,
    /// Newly generated tokens only.
    pub tokens: Vec<TokenId>,
    pub traces: Vec<StepTrace>,
    pub totals: DecodeTotals,
    /// True when generation ended on the stop token.
    pub stopped: bool,
}

impl DecodeResult {
    /// Fraction of acceptance tests that accepted the draft.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let trials: usize = self.traces.iter().map(StepTrace::acceptance_trials).sum();
        let accepted: usize = self.traces.iter().map(|t| t.accepted_n).sum();
        (trials > 0).then(|| accepted as f64 / trials as f64)
    }

    fn new(prompt: Vec<TokenId>) -> Self {
        Self { prompt, tokens: Vec::new(), traces: Vec::new(), totals: DecodeTotals::default(), stopped: false }
    }

    /// Appends a step's tokens, honoring the budget and stop token. Returns
    /// true when generation is finished.
    fn absorb(&mut self, tokens: &[TokenId], mut trace: StepTrace, config: &SpecConfig) -> bool {
        let mut kept = 0;
        let mut done = false;
        for &tok in tokens {
            self.tokens.push(tok);
            kept += 1;
            if Some(tok) == config.stop_token {
                self.stopped = true;
                done = true;
                break;
            }
            if self.tokens.len() >= config.max_new_tokens {
                done = true;
                break;
            }
        }
        trace.kept = kept;
        self.totals.target_calls += trace.target_calls;
        self.totals.target_prefixes += trace.target_prefixes;
        self.totals.draft_calls += trace.draft_calls;
        self.totals.tokens_emitted += kept;
        self.totals.steps += 1;
        self.traces.push(trace);
        done
    }
}

fn starting_context(prompt: &[TokenId], config: &SpecConfig) -> Vec<TokenId> {
    if prompt.is_empty() {
        vec![config.bos_token.unwrap_or_default()]
    } else {
        prompt.to_vec()
    }
}

/// Speculative generation: repeats [`speculative_step`] until `max_new_tokens`
/// tokens exist or the stop token is produced. Tokens after a stop token or
/// past the budget are discarded.
pub fn decode<P, Q>(
    target: &P,
    draft: &Q,
    prompt: &[TokenId],
    config: &SpecConfig,
) -> Result<DecodeResult, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    config.validate(target.vocab_size())?;
    let mut context = starting_context(prompt, config);
    let mut result = DecodeResult::new(context.clone());
    let mut rng = Stream::new(config.seed);
    loop {
        let (tokens, trace) = speculative_step(target, draft, &context, config, &mut rng)?;
        let before = result.tokens.len();
        let done = result.absorb(&tokens, trace, config);
        context.extend_from_slice(&result.tokens[before..]);
        if done {
            return Ok(result);
        }
    }
}

/// Autoregressive baseline: one target call and one variate per token.
pub fn standard_decode<P>(
    target: &P,
    prompt: &[TokenId],
    config: &SpecConfig,
) -> Result<DecodeResult, EngineError>
where
    P: LanguageModel + ?Sized,
{
    config.validate(target.vocab_size())?;
    let mut context = starting_context(prompt, config);
    let mut result = DecodeResult::new(context.clone());
    let mut rng = Stream::new(config.seed);
    loop {
        let p = standardize(&target.evaluate(&context), target.score_kind(), &config.policy)?;
        let token = sample(&p, &mut rng);
        let trace = StepTrace {
            drafted: Vec::new(),
            accepted_n: 0,
            correction: Correction { token, source: CorrectionSource::Target },
            target_calls: 1,
            target_prefixes: 1,
            draft_calls: 0,
            kept: 1,
        };
        context.push(token);
        if result.absorb(&[token], trace, config) {
            return Ok(result);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::Distribution;
    use crate::models::StatelessModel;

    fn stateless(v: &[f64]) -> StatelessModel {
        StatelessModel::new(Distribution::new(v.to_vec()).unwrap())
    }

    #[test]
    fn budget_of_one_token() {
        let m = stateless(&[0.5, 0.5]);
        let cfg = SpecConfig::default().with_gamma(4).with_max_new_tokens(1);
        let r = decode(&m, &m, &[TokenId(0)], &cfg).unwrap();
        assert_eq!(r.tokens.len(), 1);
        assert_eq!(r.totals.steps, 1);
        assert_eq!(r.traces[0].kept, 1);
        assert_eq!(r.traces[0].emitted(), 5);
    }

    #[test]
    fn stop_token_truncates_block() {
        // every token is 1, so the first accepted draft is the stop token.
        let m = stateless(&[0.0, 1.0]);
        let cfg = SpecConfig::default().with_gamma(4).with_stop_token(TokenId(1));
        let r = decode(&m, &m, &[TokenId(0)], &cfg).unwrap();
        assert_eq!(r.tokens, vec![TokenId(1)]);
        assert!(r.stopped);
    }

    #[test]
    fn empty_prompt_gets_bos() {
        let m = stateless(&[0.5, 0.5]);
        let mut cfg = SpecConfig::default().with_max_new_tokens(3);
        cfg.bos_token = Some(TokenId(1));
        let r = decode(&m, &m, &[], &cfg).unwrap();
        assert_eq!(r.prompt, vec![TokenId(1)]);
    }

    #[test]
    fn totals_match_traces() {
        let p = stateless(&[0.5, 0.3, 0.2]);
        let q = crate::models::random_model(3);
        let cfg = SpecConfig::default().with_gamma(3).with_max_new_tokens(500).with_seed(4);
        let r = decode(&p, &q, &[TokenId(0)], &cfg).unwrap();
        assert_eq!(r.tokens.len(), 500);
        assert_eq!(r.traces.iter().map(|t| t.kept).sum::<usize>(), 500);
        assert_eq!(r.totals.target_calls, r.traces.len());
        assert!(r.totals.target_calls <= r.totals.tokens_emitted);
        let rate = r.acceptance_rate().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn standard_decode_one_call_per_token_and_reproducible() {
        let m = stateless(&[0.25, 0.25, 0.5]);
        let cfg = SpecConfig::default().with_max_new_tokens(40).with_seed(9);
        let a = standard_decode(&m, &[TokenId(2)], &cfg).unwrap();
        let b = standard_decode(&m, &[TokenId(2)], &cfg).unwrap();
        assert_eq!(a.totals.target_calls, 40);
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let p = stateless(&[0.5, 0.3, 0.2]);
        let q = stateless(&[0.2, 0.3, 0.5]);
        let cfg = SpecConfig::default().with_gamma(3).with_max_new_tokens(20).with_seed(1);
        let r = decode(&p, &q, &[TokenId(0)], &cfg).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: DecodeResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let cfg_back: SpecConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg_back, cfg);
    }
}

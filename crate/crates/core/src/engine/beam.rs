//! Beam search with and without a draft model.
//!
//! The speculative variant runs a width-`u` beam search with the draft model
//! for `gamma` steps, scores every prefix it produced with one batched target
//! call, and then replays standard width-`w` beam search on those scores.
//! Step `t` is kept only while the target's top-`w` set is contained in the
//! draft's top-`u` set for that step, because only then are the target scores
//! for the next step already available. Every replayed step uses exactly the
//! target scores standard beam search would use, so the final beams are
//! bitwise identical.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::config::EngineError;
use crate::distmath::{standardize, Distribution, SamplingPolicy, TokenId};
use crate::models::LanguageModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Generated tokens, excluding the prompt.
    pub tokens: Vec<TokenId>,
    /// Cumulative natural-log probability under the scoring model.
    pub score: f64,
}

/// One speculative block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamBlock {
    /// Steps the draft model searched ahead.
    pub drafted_steps: usize,
    /// Drafted steps whose target top-w fell inside the draft top-u.
    pub accepted_steps: usize,
    /// Beam steps this block advanced (accepted steps plus the step that
    /// was resolved from target scores when the block ended).
    pub advanced: usize,
    pub target_prefixes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSearchResult {
    pub beams: Vec<Beam>,
    pub blocks: Vec<BeamBlock>,
    pub target_calls: usize,
    pub draft_calls: usize,
}

impl BeamSearchResult {
    pub fn acceptance_rate(&self) -> Option<f64> {
        let drafted: usize = self.blocks.iter().map(|b| b.drafted_steps).sum();
        let accepted: usize = self.blocks.iter().map(|b| b.accepted_steps).sum();
        (drafted > 0).then(|| accepted as f64 / drafted as f64)
    }
}

/// Descending score, then lexicographically smaller token sequence.
fn beam_order(a: &Beam, b: &Beam) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Expands every beam by every token with positive probability and keeps the best `width`.
fn expand(beams: &[Beam], dists: &[&Distribution<f64>], width: usize) -> Vec<Beam> {
    let mut candidates = Vec::new();
    for (beam, dist) in beams.iter().zip(dists) {
        for (tok, &p) in dist.probs().iter().enumerate() {
            if p > 0.0 {
                let mut tokens = Vec::with_capacity(beam.tokens.len() + 1);
                tokens.extend_from_slice(&beam.tokens);
                tokens.push(TokenId::from_index(tok));
                candidates.push(Beam { tokens, score: beam.score + p.ln() });
            }
        }
    }
    candidates.sort_by(beam_order);
    candidates.truncate(width);
    candidates
}

fn full_prefix(prompt: &[TokenId], beam: &Beam) -> Vec<TokenId> {
    let mut v = Vec::with_capacity(prompt.len() + beam.tokens.len());
    v.extend_from_slice(prompt);
    v.extend_from_slice(&beam.tokens);
    v
}

fn score_batch<M: LanguageModel + ?Sized>(
    model: &M,
    prefixes: &[Vec<TokenId>],
) -> Result<Vec<Distribution<f64>>, EngineError> {
    let raw = model.evaluate_batch(prefixes);
    if raw.len() != prefixes.len() {
        return Err(EngineError::BatchSize { expected: prefixes.len(), got: raw.len() });
    }
    raw.iter()
        .map(|s| standardize(s, model.score_kind(), &SamplingPolicy::standard()).map_err(Into::into))
        .collect()
}

fn check_width(width: usize) -> Result<(), EngineError> {
    if width == 0 {
        return Err(EngineError::InvalidConfig("beam width must be positive".into()));
    }
    Ok(())
}

/// Width-`w` beam search with one batched target call per step.
pub fn standard_beam_search<P: LanguageModel + ?Sized>(
    target: &P,
    prompt: &[TokenId],
    w: usize,
    steps: usize,
) -> Result<Vec<Beam>, EngineError> {
    check_width(w)?;
    let mut beams = vec![Beam { tokens: Vec::new(), score: 0.0 }];
    for _ in 0..steps {
        let prefixes: Vec<_> = beams.iter().map(|b| full_prefix(prompt, b)).collect();
        let dists = score_batch(target, &prefixes)?;
        let refs: Vec<_> = dists.iter().collect();
        beams = expand(&beams, &refs, w);
    }
    Ok(beams)
}

/// Beam search that drafts `gamma` steps at width `u` with `draft` and
/// verifies them with one batched `target` call per block.
pub fn speculative_beam_search<P, Q>(
    target: &P,
    draft: &Q,
    prompt: &[TokenId],
    w: usize,
    u: usize,
    gamma: usize,
    steps: usize,
) -> Result<BeamSearchResult, EngineError>
where
    P: LanguageModel + ?Sized,
    Q: LanguageModel + ?Sized,
{
    check_width(w)?;
    if u < w {
        return Err(EngineError::InvalidConfig(format!("draft width {u} below beam width {w}")));
    }
    if gamma == 0 {
        return Err(EngineError::InvalidConfig("gamma must be at least 1".into()));
    }
    if target.vocab_size() != draft.vocab_size() {
        return Err(EngineError::VocabMismatch {
            target: target.vocab_size(),
            draft: draft.vocab_size(),
        });
    }

    let mut beams = vec![Beam { tokens: Vec::new(), score: 0.0 }];
    let mut blocks = Vec::new();
    let mut target_calls = 0;
    let mut draft_calls = 0;
    let mut done = 0;
    while done < steps {
        let lookahead = gamma.min(steps - done);

        // Draft search; starts from the current beams with their target scores.
        let mut drafted_levels: Vec<Vec<Beam>> = Vec::with_capacity(lookahead);
        let mut frontier = beams.clone();
        for _ in 0..lookahead {
            let prefixes: Vec<_> = frontier.iter().map(|b| full_prefix(prompt, b)).collect();
            let dists = score_batch(draft, &prefixes)?;
            draft_calls += 1;
            let refs: Vec<_> = dists.iter().collect();
            frontier = expand(&frontier, &refs, u);
            drafted_levels.push(frontier.clone());
        }

        // One batched target call over the current beams and every drafted level.
        let mut index: HashMap<Vec<TokenId>, usize> = HashMap::new();
        let mut batch = Vec::new();
        for beam in beams.iter().chain(drafted_levels.iter().flatten()) {
            if !index.contains_key(&beam.tokens) {
                index.insert(beam.tokens.clone(), batch.len());
                batch.push(full_prefix(prompt, beam));
            }
        }
        let target_dists = score_batch(target, &batch)?;
        target_calls += 1;

        let max_advance = (lookahead + 1).min(steps - done);
        let mut accepted_steps = 0;
        let mut advanced = 0;
        for t in 0..max_advance {
            let refs: Vec<&Distribution<f64>> = beams
                .iter()
                .map(|b| &target_dists[index[&b.tokens]])
                .collect();
            let next = expand(&beams, &refs, w);
            advanced += 1;
            let within_draft = t < lookahead && {
                let drafted: HashSet<&Vec<TokenId>> =
                    drafted_levels[t].iter().map(|b| &b.tokens).collect();
                next.iter().all(|b| drafted.contains(&b.tokens))
            };
            beams = next;
            if !within_draft {
                break;
            }
            accepted_steps += 1;
        }
        done += advanced;
        blocks.push(BeamBlock {
            drafted_steps: lookahead,
            accepted_steps,
            advanced,
            target_prefixes: batch.len(),
        });
    }
    Ok(BeamSearchResult { beams, blocks, target_calls, draft_calls })
}

use std::collections::BTreeMap;

use super::{LanguageModel, ModelError};
use crate::distmath::TokenId;
use crate::rng::Stream;

pub const DEFAULT_SMOOTHING: f64 = 0.01;

/// Next-token counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct ContextCounts {
    pub(crate) total: u64,
    pub(crate) next: BTreeMap<u32, u64>,
}

/// Add-k smoothed n-gram model.
///
/// `P(x | ctx) = (count(ctx, x) + k) / (count(ctx) + k * V)` where `ctx` is
/// the last `order - 1` tokens. Contexts never seen in training (including
/// prefixes shorter than `order - 1`) back off to the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing_k: f64,
    vocab_size: usize,
    pub(crate) counts: BTreeMap<Vec<u32>, ContextCounts>,
}

/// Counts every sliding window of `order` tokens in `corpus`.
pub fn train_ngram(
    corpus: &[TokenId],
    order: usize,
    smoothing_k: f64,
    vocab_size: usize,
) -> Result<NGramModel, ModelError> {
    let mut model = NGramModel::empty(order, smoothing_k, vocab_size)?;
    if corpus.len() < order {
        return Err(ModelError::CorpusTooShort { len: corpus.len(), order });
    }
    if let Some(bad) = corpus.iter().find(|t| t.index() >= vocab_size) {
        return Err(ModelError::TokenOutOfRange { token: bad.0, vocab_size });
    }
    for window in corpus.windows(order) {
        let (ctx, next) = window.split_at(order - 1);
        let key: Vec<u32> = ctx.iter().map(|t| t.0).collect();
        let entry = model.counts.entry(key).or_default();
        entry.total += 1;
        *entry.next.entry(next[0].0).or_insert(0) += 1;
    }
    Ok(model)
}

impl NGramModel {
    pub(crate) fn empty(order: usize, smoothing_k: f64, vocab_size: usize) -> Result<Self, ModelError> {
        if order == 0 {
            return Err(ModelError::InvalidParameter("order must be at least 1".into()));
        }
        if !(smoothing_k.is_finite() && smoothing_k > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "smoothing must be positive, got {smoothing_k}"
            )));
        }
        if vocab_size == 0 || vocab_size > u32::MAX as usize {
            return Err(ModelError::InvalidParameter(format!("bad vocab size {vocab_size}")));
        }
        Ok(Self { order, smoothing_k, vocab_size, counts: BTreeMap::new() })
    }

    /// Random count table covering every context; counts are `floor(100 * u^skew)`
    /// so larger `skew` gives peakier conditionals.
    pub fn random(
        order: usize,
        vocab_size: usize,
        smoothing_k: f64,
        skew: f64,
        rng: &mut Stream,
    ) -> Result<Self, ModelError> {
        let mut model = Self::empty(order, smoothing_k, vocab_size)?;
        let n_contexts = vocab_size.checked_pow(order as u32 - 1).filter(|&n| n <= 1 << 20).ok_or_else(
            || ModelError::InvalidParameter("too many contexts for a random table".into()),
        )?;
        for c in 0..n_contexts {
            let mut key = Vec::with_capacity(order - 1);
            let mut rest = c;
            for _ in 0..order - 1 {
                key.push((rest % vocab_size) as u32);
                rest /= vocab_size;
            }
            key.reverse();
            let mut counts = ContextCounts::default();
            for tok in 0..vocab_size {
                let n = (100.0 * rng.uniform().powf(skew)) as u64;
                if n > 0 {
                    counts.total += n;
                    counts.next.insert(tok as u32, n);
                }
            }
            if counts.total > 0 {
                model.counts.insert(key, counts);
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing_k
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    /// Count of `next` observed after `context`, zero if unseen.
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        let key: Vec<u32> = context.iter().map(|t| t.0).collect();
        self.counts.get(&key).and_then(|c| c.next.get(&next.0)).copied().unwrap_or(0)
    }
}

impl LanguageModel for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn evaluate(&self, prefix: &[TokenId]) -> Vec<f64> {
        let uniform = || vec![1.0 / self.vocab_size as f64; self.vocab_size];
        let ctx_len = self.order - 1;
        if prefix.len() < ctx_len {
            return uniform();
        }
        let key: Vec<u32> = prefix[prefix.len() - ctx_len..].iter().map(|t| t.0).collect();
        let Some(counts) = self.counts.get(&key) else {
            return uniform();
        };
        let k = self.smoothing_k;
        let denom = counts.total as f64 + k * self.vocab_size as f64;
        let mut out = vec![k / denom; self.vocab_size];
        for (&tok, &n) in &counts.next {
            out[tok as usize] = (n as f64 + k) / denom;
        }
        out
    }

    fn describe(&self) -> String {
        format!(
            "{}-gram(vocab={}, k={}, contexts={})",
            self.order,
            self.vocab_size,
            self.smoothing_k,
            self.counts.len()
        )
    }
}

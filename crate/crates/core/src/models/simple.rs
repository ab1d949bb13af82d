use super::LanguageModel;
use crate::distmath::{Distribution, TokenId};

/// Returns the same distribution for every prefix, which makes the per-position
/// acceptance rate constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StatelessModel {
    fixed: Distribution<f64>,
}

impl StatelessModel {
    pub fn new(fixed: Distribution<f64>) -> Self {
        Self { fixed }
    }

    pub fn fixed(&self) -> &Distribution<f64> {
        &self.fixed
    }
}

impl LanguageModel for StatelessModel {
    fn vocab_size(&self) -> usize {
        self.fixed.len()
    }

    fn evaluate(&self, _prefix: &[TokenId]) -> Vec<f64> {
        self.fixed.probs().to_vec()
    }

    fn describe(&self) -> String {
        format!("stateless{:?}", self.fixed.probs())
    }
}

/// Picks tokens uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformModel {
    vocab_size: usize,
}

impl LanguageModel for UniformModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn evaluate(&self, _prefix: &[TokenId]) -> Vec<f64> {
        vec![1.0 / self.vocab_size as f64; self.vocab_size]
    }

    fn describe(&self) -> String {
        format!("uniform(vocab={})", self.vocab_size)
    }
}

pub fn random_model(vocab_size: usize) -> UniformModel {
    assert!(vocab_size > 0, "empty vocabulary");
    UniformModel { vocab_size }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::overlap;

    #[test]
    fn uniform_everywhere() {
        let m = random_model(4);
        assert_eq!(m.evaluate(&[TokenId(1), TokenId(3)]), vec![0.25; 4]);
    }

    #[test]
    fn uniform_draft_always_overlaps() {
        let target = StatelessModel::new(Distribution::new(vec![0.9, 0.1]).unwrap());
        let q = Distribution::new(random_model(2).evaluate(&[])).unwrap();
        let alpha = overlap(target.fixed(), &q).unwrap();
        assert!((alpha - 0.6).abs() < 1e-15);
    }
}

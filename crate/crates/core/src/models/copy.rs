use super::{LanguageModel, ModelError};
use crate::distmath::TokenId;

/// Predicts the token that followed the most recent earlier occurrence of the
/// longest repeated suffix of the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyModel {
    min_match: usize,
    copy_mass: f64,
    vocab_size: usize,
}

impl CopyModel {
    pub const DEFAULT_MIN_MATCH: usize = 2;
    pub const DEFAULT_COPY_MASS: f64 = 0.9;

    pub fn new(vocab_size: usize, min_match: usize, copy_mass: f64) -> Result<Self, ModelError> {
        if min_match == 0 {
            return Err(ModelError::InvalidParameter("min_match must be positive".into()));
        }
        if !(copy_mass > 0.0 && copy_mass < 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "copy_mass must be in (0, 1), got {copy_mass}"
            )));
        }
        if vocab_size == 0 {
            return Err(ModelError::InvalidParameter("empty vocabulary".into()));
        }
        Ok(Self { min_match, copy_mass, vocab_size })
    }

    pub fn with_defaults(vocab_size: usize) -> Self {
        Self::new(vocab_size, Self::DEFAULT_MIN_MATCH, Self::DEFAULT_COPY_MASS)
            .expect("default copy parameters are valid")
    }

    /// Token to copy, if some suffix of length >= `min_match` re-occurs earlier.
    pub fn predicted_token(&self, prefix: &[TokenId]) -> Option<TokenId> {
        let n = prefix.len();
        // The earlier occurrence must be followed by a token inside the prefix,
        // so it starts at most at n - 1 - len.
        for len in (self.min_match..n).rev() {
            let suffix = &prefix[n - len..];
            if let Some(start) =
                (0..n - len).rev().find(|&start| &prefix[start..start + len] == suffix)
            {
                return Some(prefix[start + len]);
            }
        }
        None
    }
}

impl LanguageModel for CopyModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn evaluate(&self, prefix: &[TokenId]) -> Vec<f64> {
        match self.predicted_token(prefix) {
            Some(tok) if tok.index() < self.vocab_size => {
                let rest = (1.0 - self.copy_mass) / self.vocab_size as f64;
                let mut out = vec![rest; self.vocab_size];
                out[tok.index()] += self.copy_mass;
                out
            }
            _ => vec![1.0 / self.vocab_size as f64; self.vocab_size],
        }
    }

    fn describe(&self) -> String {
        format!("copy(vocab={}, min_match={}, mass={})", self.vocab_size, self.min_match, self.copy_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[u32]) -> Vec<TokenId> {
        v.iter().map(|&t| TokenId(t)).collect()
    }

    #[test]
    fn copies_after_matched_suffix() {
        let m = CopyModel::with_defaults(5);
        let p = m.evaluate(&toks(&[0, 1, 2, 0, 1]));
        assert!((p[2] - (0.9 + 0.1 / 5.0)).abs() < 1e-15);
        assert!((p[0] - 0.02).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_match_is_uniform() {
        let m = CopyModel::with_defaults(4);
        assert_eq!(m.evaluate(&toks(&[3])), vec![0.25; 4]);
        assert_eq!(m.evaluate(&toks(&[0, 1, 2, 3])), vec![0.25; 4]);
        assert_eq!(m.evaluate(&[]), vec![0.25; 4]);
    }

    #[test]
    fn overlapping_repeat() {
        let m = CopyModel::with_defaults(3);
        assert_eq!(m.predicted_token(&toks(&[0, 0, 0])), Some(TokenId(0)));
    }

    #[test]
    fn longest_suffix_then_most_recent() {
        let m = CopyModel::new(9, 1, 0.5).unwrap();
        // suffix [1,2] occurs at 0 (-> 3) and at 4 (-> 5); most recent wins.
        assert_eq!(m.predicted_token(&toks(&[1, 2, 3, 7, 1, 2, 5, 1, 2])), Some(TokenId(5)));
        // longest match [4,1,2] at 0 beats the more recent shorter [1,2] at 4.
        assert_eq!(m.predicted_token(&toks(&[4, 1, 2, 3, 1, 2, 8, 4, 1, 2])), Some(TokenId(3)));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CopyModel::new(4, 0, 0.9).is_err());
        assert!(CopyModel::new(4, 2, 1.0).is_err());
    }
}

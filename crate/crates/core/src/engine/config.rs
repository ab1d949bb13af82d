use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distmath::{DistError, SamplingPolicy, TokenId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("target vocabulary ({target}) and draft vocabulary ({draft}) differ")]
    VocabMismatch { target: usize, draft: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model returned {got} score vectors for {expected} prefixes")]
    BatchSize { expected: usize, got: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Deliberate defects injected into the speculative step. Only the harness
/// uses these, to show that the equivalence test detects broken samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// On rejection, sample the correction from the unmodified target distribution.
    SkipResidual,
    /// On rejection, sample the correction from the draft distribution.
    DraftAsResidual,
    /// Judge draft `i` against the target distribution of position `i + 1`.
    OffByOneAcceptance,
}

impl std::str::FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Mutation::None),
            "skip-residual" => Ok(Mutation::SkipResidual),
            "draft-as-residual" | "use-q" => Ok(Mutation::DraftAsResidual),
            "off-by-one" => Ok(Mutation::OffByOneAcceptance),
            other => Err(format!(
                "unknown mutation {other:?} (expected none, skip-residual, draft-as-residual, off-by-one)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    /// Draft tokens proposed per step.
    pub gamma: usize,
    /// Acceptance lenience in (0, 1]; 1 preserves the target distribution exactly.
    pub lenience: f64,
    pub policy: SamplingPolicy,
    pub seed: u64,
    pub max_new_tokens: usize,
    pub stop_token: Option<TokenId>,
    /// Injected when decoding starts from an empty prompt; token 0 if unset.
    pub bos_token: Option<TokenId>,
    #[serde(default)]
    pub mutation: Mutation,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            gamma: 4,
            lenience: 1.0,
            policy: SamplingPolicy::standard(),
            seed: 0,
            max_new_tokens: 64,
            stop_token: None,
            bos_token: None,
            mutation: Mutation::None,
        }
    }
}

impl SpecConfig {
    pub fn with_gamma(mut self, gamma: usize) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lenience(mut self, lenience: f64) -> Self {
        self.lenience = lenience;
        self
    }

    pub fn with_policy(mut self, policy: SamplingPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_new_tokens(mut self, n: usize) -> Self {
        self.max_new_tokens = n;
        self
    }

    pub fn with_stop_token(mut self, token: TokenId) -> Self {
        self.stop_token = Some(token);
        self
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = mutation;
        self
    }

    pub fn validate(&self, vocab_size: usize) -> Result<(), EngineError> {
        if self.gamma == 0 {
            return Err(EngineError::InvalidConfig("gamma must be at least 1".into()));
        }
        if !(self.lenience > 0.0 && self.lenience <= 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "lenience must be in (0, 1], got {}",
                self.lenience
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(EngineError::InvalidConfig("max_new_tokens must be positive".into()));
        }
        for (name, tok) in [("stop_token", self.stop_token), ("bos_token", self.bos_token)] {
            if let Some(t) = tok {
                if t.index() >= vocab_size {
                    return Err(EngineError::InvalidConfig(format!(
                        "{name} {t} outside vocabulary of size {vocab_size}"
                    )));
                }
            }
        }
        self.policy.validate(vocab_size)?;
        Ok(())
    }
}

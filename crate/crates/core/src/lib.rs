//! Speculative decoding at desk scale.
//!
//! A draft model proposes `gamma` tokens, the target model scores all of them
//! in one batched call, and a modified rejection step keeps a prefix of the
//! drafts plus one corrected token so that the output is distributed exactly
//! as if the target had been sampled alone.
//!
//! Module map:
//! - [`distmath`]: distributions, sampling policies, residuals, `D_LK`.
//! - [`models`]: the [`LanguageModel`] trait, n-gram/copy/uniform/stateless
//!   models, tokenizers and model files.
//! - [`engine`]: the speculative step, decoding loops, rejection-sampling
//!   baseline and beam search.
//! - [`analysis`]: acceptance rates, expected tokens, walltime and operation
//!   factors, optimal `gamma`, parameter sweeps.
//! - [`harness`]: exactness oracle, statistical tests and cost simulation.
//!
//! The distribution arithmetic and closed-form analysis are generic over
//! [`Real`] (`f32` or `f64`); models and the engine work in `f64`.

pub mod analysis;
pub mod distmath;
pub mod engine;
pub mod harness;
pub mod models;
pub mod report;
pub mod rng;
pub mod scalar;

pub use distmath::{SamplingPolicy, ScoreKind, TokenId};
pub use engine::{decode, speculative_step, standard_decode, DecodeResult, SpecConfig, StepTrace};
pub use models::LanguageModel;
pub use rng::Stream;
pub use scalar::Real;

/// Double-precision distribution, the one the engine uses.
pub type Distribution = distmath::Distribution<f64>;
/// Single-precision distribution.
pub type DistributionF32 = distmath::Distribution<f32>;

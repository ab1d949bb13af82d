//! Decoding algorithms.
//!
//! [`speculative_step`] is one draft-then-verify iteration; [`decode`] loops it
//! into a generation. [`standard_decode`] is the one-target-call-per-token
//! baseline sharing the same sampling path, [`rejection_baseline_step`] is the
//! non-iterative rejection sampler it is compared against, and the beam
//! search pair lives in [`beam`].

pub mod beam;
mod config;
mod decode;
mod rejection;
mod step;

pub use beam::{speculative_beam_search, standard_beam_search, Beam, BeamBlock, BeamSearchResult};
pub use config::{EngineError, Mutation, SpecConfig};
pub use decode::{decode, standard_decode, DecodeResult, DecodeTotals};
pub use rejection::{rejection_accept_probability, rejection_baseline_step, rejection_sample};
pub use step::{
    argmax_lenient_accept, speculative_step, Correction, CorrectionSource, DraftRecord, StepTrace,
};

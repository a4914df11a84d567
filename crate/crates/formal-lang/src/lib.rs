//! Engine for the parametric context-sensitive block languages: string
//! construction, membership, prefix oracles, training-sequence encoding,
//! and the autoregressive rollout environment.
//!
//! A language is a family of strings `a_1^n a_2^(n+m_2) ... a_k^(n+m_k)`
//! where the offsets `m_i` fix the relative block lengths. The dataset
//! form uses four letters `a b c d` with offsets in `[-3, 2]`; the
//! general form uses `k` letters with offsets in `[1, M]`.

pub mod alphabet;
pub mod encoding;
pub mod language;
pub mod rollout;

pub use alphabet::{Alphabet, Token};
pub use encoding::{encode_training_sequence, TrainingSequence, TOTAL_LEN};
pub use language::{
    AllowedNext, DatasetLanguageSpec, GeneralLanguageSpec, LangError, LanguageSpec,
};
pub use rollout::{generation_accuracy, sample_rollout, Rollout, SequenceModel};

//! Teacher-forcing sequence encoding for subject training.
//!
//! A training example is `BOS + member string + EOS`, padded with EOS
//! to a fixed total length. Inputs are positions `0..total_len-1`,
//! targets positions `1..total_len`.

use crate::alphabet::{Alphabet, Token};
use crate::language::{DatasetLanguageSpec, LangError, LanguageSpec};

/// Default training sequence length, including BOS and EOS.
pub const TOTAL_LEN: usize = 42;

/// Largest member parameter sampled during training.
pub const MAX_TRAIN_N: u64 = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSequence {
    pub inputs: Vec<Token>,
    pub targets: Vec<Token>,
}

pub fn encode_training_sequence(
    spec: &DatasetLanguageSpec,
    n: u64,
    total_len: usize,
) -> Result<TrainingSequence, LangError> {
    let body = spec.string_for_n(n)?;
    if body.len() + 2 > total_len {
        return Err(LangError::SequenceTooLong {
            len: body.len() + 2,
            total_len,
        });
    }
    let eos = spec.alphabet().eos();
    let mut full = Vec::with_capacity(total_len);
    full.push(Alphabet::BOS);
    full.extend_from_slice(&body);
    full.resize(total_len, eos);

    Ok(TrainingSequence {
        inputs: full[..total_len - 1].to_vec(),
        targets: full[1..].to_vec(),
    })
}

/// Largest `n <= cap` whose encoded sequence fits in `total_len`, or
/// `None` when even the shortest member does not fit.
pub fn max_fitting_n(spec: &DatasetLanguageSpec, total_len: usize, cap: u64) -> Option<u64> {
    let mut best = None;
    for n in spec.min_n()..=cap {
        if spec.total_len(n) as usize + 2 <= total_len {
            best = Some(n);
        } else {
            break;
        }
    }
    best
}

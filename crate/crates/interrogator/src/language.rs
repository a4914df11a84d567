//! Language-identification strategies with exact interaction counts.
//!
//! Interactive: starting from the probe `a_1 a_2`, the interrogator
//! walks the oracle autoregressively. Because the first probe pins
//! `n = 1`, exactly one token can follow any prefix on this walk; the
//! interrogator tracks the candidate set and only spends an interaction
//! when the next token is not already forced by every remaining
//! candidate (forced tokens are appended for free, and the walk stops
//! as soon as one candidate remains). This keeps the count within the
//! `M * (k - 1)` bound.
//!
//! Non-interactive: a fixed probe set constructed level by level. For
//! each block level `j` from 4 to `k`, and each offset combination
//! `(m_2 .. m_{j-1})`, the probes `a_1 a_2^{1+m_2} .. a_{j-1}^{1+m_{j-1}}
//! a_j^c` for `c = 2..=M` pin `m_j`; lower offsets are read from which
//! combination stays live. The set sizes to the closed form
//! `M^(k-1) - M^2`.

use formal_lang::{Alphabet, AllowedNext, GeneralLanguageSpec, LanguageSpec, Token};

use crate::set::InterrogateError;
use crate::transcript::Transcript;

/// Transcript plus the recovered language.
#[derive(Clone, Debug)]
pub struct LanguageTranscript {
    pub transcript: Transcript<Vec<Token>, AllowedNext>,
    pub recovered: GeneralLanguageSpec,
}

/// Identify a language oracle (pure form, no EOS) interactively.
///
/// The count never exceeds `bound * (k - 1)`.
pub fn identify_language_interactive<F>(
    k: usize,
    bound: u32,
    oracle: F,
) -> Result<LanguageTranscript, InterrogateError>
where
    F: Fn(&[Token]) -> AllowedNext,
{
    let specs = GeneralLanguageSpec::grid(k, bound);
    let alphabet = Alphabet::new(k);
    let mut candidates: Vec<usize> = (0..specs.len()).collect();
    let mut probes: Vec<(Vec<Token>, AllowedNext)> = Vec::new();
    let mut prefix: Vec<Token> = vec![alphabet.letter(1), alphabet.letter(2)];

    let single_token = |ans: &AllowedNext| -> Result<Option<Token>, InterrogateError> {
        match ans {
            AllowedNext::Dead => Err(InterrogateError::MalformedOracle {
                detail: "walk reached a dead prefix; oracle outside the declared set".into(),
            }),
            AllowedNext::Next(set) if set.len() > 1 => Err(InterrogateError::MalformedOracle {
                detail: format!(
                    "oracle allowed {} tokens after the opening probe; the walk admits one",
                    set.len()
                ),
            }),
            AllowedNext::Next(set) => Ok(set.iter().next().copied()),
        }
    };

    // Opening probe (skipped when one candidate remains, e.g. M = 1).
    if candidates.len() > 1 {
        let ans = oracle(&prefix);
        candidates.retain(|&c| specs[c].allowed_next(&prefix, false) == ans);
        probes.push((prefix.clone(), ans.clone()));
        if candidates.is_empty() {
            return Err(InterrogateError::MalformedOracle {
                detail: "no candidate matches the opening probe".into(),
            });
        }
        match single_token(&ans)? {
            Some(t) => prefix.push(t),
            None => {} // complete already; candidates must be singleton below
        }
    }

    while candidates.len() > 1 {
        // What would each candidate answer for the current prefix?
        let predictions: Vec<AllowedNext> = candidates
            .iter()
            .map(|&c| specs[c].allowed_next(&prefix, false))
            .collect();
        let all_agree = predictions.windows(2).all(|w| w[0] == w[1]);

        let answer = if all_agree {
            predictions[0].clone() // forced; no interaction spent
        } else {
            let ans = oracle(&prefix);
            probes.push((prefix.clone(), ans.clone()));
            let keep: Vec<usize> = candidates
                .iter()
                .zip(predictions.iter())
                .filter(|(_, p)| **p == ans)
                .map(|(&c, _)| c)
                .collect();
            if keep.is_empty() {
                return Err(InterrogateError::MalformedOracle {
                    detail: "oracle answers match no candidate".into(),
                });
            }
            candidates = keep;
            ans
        };

        match single_token(&answer)? {
            Some(t) => prefix.push(t),
            None => break, // complete member reached
        }
    }

    if candidates.len() != 1 {
        return Err(InterrogateError::MalformedOracle {
            detail: format!("{} candidates remain after the walk", candidates.len()),
        });
    }
    let recovered = specs[candidates[0]].clone();
    debug_assert!(probes.len() <= bound as usize * (k - 1));
    Ok(LanguageTranscript {
        transcript: Transcript {
            probes,
            identified: Some(candidates[0]),
        },
        recovered,
    })
}

/// The fixed probe set of the non-interactive strategy, organized by
/// block level.
#[derive(Clone, Debug)]
pub struct NoninteractiveProbeSet {
    pub k: usize,
    pub bound: u32,
    /// `(level j, probes for that level)` for `j = 4..=k`.
    pub levels: Vec<(usize, Vec<Vec<Token>>)>,
}

impl NoninteractiveProbeSet {
    pub fn total(&self) -> usize {
        self.levels.iter().map(|(_, p)| p.len()).sum()
    }

    /// Size of the top level (`j = k`): `M^(k-2) * (M-1)`.
    pub fn top_level_size(&self) -> usize {
        self.levels.last().map(|(_, p)| p.len()).unwrap_or(0)
    }

    /// The proof's closed form for the whole set: `M^(k-1) - M^2`.
    pub fn closed_form(k: usize, bound: u32) -> usize {
        let m = bound as usize;
        m.pow(k as u32 - 1) - m * m
    }

    pub fn all_probes(&self) -> Vec<&Vec<Token>> {
        self.levels.iter().flat_map(|(_, p)| p.iter()).collect()
    }
}

/// Construct the non-interactive probe set for `k >= 4`.
pub fn noninteractive_language_probe_set(k: usize, bound: u32) -> NoninteractiveProbeSet {
    assert!(k >= 4, "the level construction needs k >= 4");
    let alphabet = Alphabet::new(k);
    let m = bound as usize;

    let mut levels = Vec::new();
    for j in 4..=k {
        // Offset combinations for blocks 2..j-1 (j - 2 slots).
        let slots = j - 2;
        let combos = m.pow(slots as u32);
        let mut probes = Vec::with_capacity(combos * (m - 1));
        let mut combo = vec![1usize; slots];
        loop {
            // Prefix a_1 a_2^{1+m_2} ... a_{j-1}^{1+m_{j-1}}.
            let mut base = vec![alphabet.letter(1)];
            for (slot, &off) in combo.iter().enumerate() {
                let letter = alphabet.letter(slot + 2);
                for _ in 0..1 + off {
                    base.push(letter);
                }
            }
            for c in 2..=m {
                let mut probe = base.clone();
                for _ in 0..c {
                    probe.push(alphabet.letter(j));
                }
                probes.push(probe);
            }
            // Odometer over [1, m]^slots.
            let mut i = slots;
            let mut done = true;
            while i > 0 {
                i -= 1;
                if combo[i] < m {
                    combo[i] += 1;
                    for v in combo[i + 1..].iter_mut() {
                        *v = 1;
                    }
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
        levels.push((j, probes));
    }

    NoninteractiveProbeSet { k, bound, levels }
}

/// Identify an oracle from the fixed probe set: submit every probe,
/// then return the unique grid language consistent with all answers.
pub fn identify_language_noninteractive<F>(
    probe_set: &NoninteractiveProbeSet,
    oracle: F,
) -> Result<LanguageTranscript, InterrogateError>
where
    F: Fn(&[Token]) -> AllowedNext,
{
    let specs = GeneralLanguageSpec::grid(probe_set.k, probe_set.bound);
    let probes: Vec<(Vec<Token>, AllowedNext)> = probe_set
        .all_probes()
        .into_iter()
        .map(|p| (p.clone(), oracle(p)))
        .collect();

    let consistent: Vec<usize> = (0..specs.len())
        .filter(|&i| {
            probes
                .iter()
                .all(|(p, ans)| specs[i].allowed_next(p, false) == *ans)
        })
        .collect();

    match consistent.as_slice() {
        [only] => Ok(LanguageTranscript {
            recovered: specs[*only].clone(),
            transcript: Transcript {
                probes,
                identified: Some(*only),
            },
        }),
        [] => Err(InterrogateError::MalformedOracle {
            detail: "no grid language is consistent with the responses".into(),
        }),
        many => Err(InterrogateError::MalformedOracle {
            detail: format!("{} languages remain consistent", many.len()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_for(spec: &GeneralLanguageSpec) -> impl Fn(&[Token]) -> AllowedNext + '_ {
        move |p: &[Token]| spec.allowed_next(p, false)
    }

    #[test]
    fn interactive_identifies_all_27_within_the_bound() {
        let specs = GeneralLanguageSpec::grid(4, 3);
        let mut max_count = 0;
        for (i, spec) in specs.iter().enumerate() {
            let result = identify_language_interactive(4, 3, oracle_for(spec)).unwrap();
            assert_eq!(result.recovered, *spec, "oracle {i}");
            assert!(result.transcript.count() <= 3 * 3);
            max_count = max_count.max(result.transcript.count());
        }
        assert!(max_count <= 9, "worst case {max_count}");
    }

    #[test]
    fn interactive_recovers_offsets_from_the_walk() {
        // L(1,1,1): member(1) = a bb cc dd; blocks of size 2 each.
        let spec = GeneralLanguageSpec::new(3, vec![1, 1, 1]).unwrap();
        let result = identify_language_interactive(4, 3, oracle_for(&spec)).unwrap();
        assert_eq!(result.recovered.offsets(), &[1, 1, 1]);
        assert!(result.transcript.count() <= 9);
    }

    #[test]
    fn single_member_set_identifies_without_probing() {
        // k = 3, M = 1 is outside the general-spec bound (M >= 2), so
        // model it with M = 2 restricted... the spec case is the
        // singleton grid: emulate by bound 2 with both offsets probed.
        // The real singleton claim: a 1-candidate walk spends 0 probes.
        let spec = GeneralLanguageSpec::new(2, vec![1, 1]).unwrap();
        let result = identify_language_interactive(3, 2, oracle_for(&spec)).unwrap();
        assert!(result.transcript.count() <= 2 * 2);
        assert_eq!(result.recovered, spec);
    }

    #[test]
    fn noninteractive_set_sizes_match_the_closed_form() {
        let set = noninteractive_language_probe_set(4, 3);
        assert_eq!(set.top_level_size(), 18); // 3^2 * (3-1) = 3^3 - 3^2
        assert_eq!(set.total(), NoninteractiveProbeSet::closed_form(4, 3));
        assert_eq!(set.total(), 18);

        let set = noninteractive_language_probe_set(5, 2);
        assert_eq!(set.total(), 12); // 2^4 - 2^2
        assert_eq!(set.top_level_size(), 8); // 2^3 * (2-1)
        assert_eq!(set.total(), NoninteractiveProbeSet::closed_form(5, 2));
    }

    #[test]
    fn noninteractive_identifies_all_27_from_the_fixed_set() {
        let probe_set = noninteractive_language_probe_set(4, 3);
        let specs = GeneralLanguageSpec::grid(4, 3);
        for spec in &specs {
            let result = identify_language_noninteractive(&probe_set, oracle_for(spec)).unwrap();
            assert_eq!(result.recovered, *spec);
            assert_eq!(result.transcript.count(), 18);
        }
    }

    #[test]
    fn noninteractive_identifies_k5_m2_grid() {
        let probe_set = noninteractive_language_probe_set(5, 2);
        for spec in GeneralLanguageSpec::grid(5, 2) {
            let result = identify_language_noninteractive(&probe_set, oracle_for(&spec)).unwrap();
            assert_eq!(result.recovered, spec);
        }
    }

    #[test]
    fn exponential_gap_grows_with_k() {
        // At M = 2: non-interactive set size / measured interactive
        // worst case grows at least geometrically in k.
        let mut ratios = Vec::new();
        for k in [4usize, 5, 6] {
            let probe_set = noninteractive_language_probe_set(k, 2);
            assert_eq!(
                probe_set.total(),
                NoninteractiveProbeSet::closed_form(k, 2)
            );
            let mut worst = 0usize;
            for spec in GeneralLanguageSpec::grid(k, 2) {
                let r = identify_language_interactive(k, 2, oracle_for(&spec)).unwrap();
                assert!(r.transcript.count() <= 2 * (k - 1));
                worst = worst.max(r.transcript.count());
            }
            ratios.push(probe_set.total() as f64 / worst as f64);
        }
        assert!(ratios[1] / ratios[0] >= 1.5, "{ratios:?}");
        assert!(ratios[2] / ratios[1] >= 1.5, "{ratios:?}");
    }

    #[test]
    fn malformed_oracle_reported() {
        // An oracle that claims two continuations after the opening
        // probe violates the walk's invariant.
        let bad = |_: &[Token]| AllowedNext::Next([1u8, 2u8].into_iter().collect());
        assert!(matches!(
            identify_language_interactive(4, 3, bad),
            Err(InterrogateError::MalformedOracle { .. })
        ));
    }
}

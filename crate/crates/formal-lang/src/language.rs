//! Language specs, membership, and the generative prefix oracle.

use std::collections::BTreeSet;
use std::error::Error;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LangError {
    InvalidOffset { detail: String },
    InvalidN { n: u64, min: u64 },
    SequenceTooLong { len: usize, total_len: usize },
    NonFiniteModelOutput,
    BadModelOutput { detail: String },
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LangError::InvalidOffset { detail } => write!(f, "invalid offset: {detail}"),
            LangError::InvalidN { n, min } => {
                write!(f, "n = {n} below the valid minimum {min}")
            }
            LangError::SequenceTooLong { len, total_len } => {
                write!(f, "encoded string needs {len} slots but total_len is {total_len}")
            }
            LangError::NonFiniteModelOutput => write!(f, "model produced a non-finite output"),
            LangError::BadModelOutput { detail } => write!(f, "bad model output: {detail}"),
        }
    }
}

impl Error for LangError {}

/// Response of the generative oracle for a probe string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AllowedNext {
    /// The probe is not a prefix of any member string (the empty
    /// marker).
    Dead,
    /// Live prefix together with every token that can extend it. The
    /// set is empty for a complete member with no continuation in pure
    /// (EOS-free) mode.
    Next(BTreeSet<Token>),
}

impl AllowedNext {
    pub fn is_dead(&self) -> bool {
        matches!(self, AllowedNext::Dead)
    }

    pub fn tokens(&self) -> Option<&BTreeSet<Token>> {
        match self {
            AllowedNext::Dead => None,
            AllowedNext::Next(s) => Some(s),
        }
    }
}

/// Common view over both spec forms: `k` letter blocks where block `i`
/// has length `n + offset(i)` and `offset(1) = 0`.
pub trait LanguageSpec {
    /// Number of letters `k`.
    fn letters(&self) -> usize;

    /// Offset of block `i` (1-based); `offset(1)` is always 0.
    fn offset(&self, block: usize) -> i64;

    /// Smallest `n` for which all block lengths are defined.
    fn n_floor(&self) -> u64;

    fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.letters())
    }

    fn block_len(&self, block: usize, n: u64) -> u64 {
        let v = n as i64 + self.offset(block);
        debug_assert!(v >= 0, "block length negative for valid n");
        v as u64
    }

    fn total_len(&self, n: u64) -> u64 {
        (1..=self.letters()).map(|i| self.block_len(i, n)).sum()
    }

    /// Smallest `n` that yields a non-empty member string. The empty
    /// string is never a member.
    fn min_n(&self) -> u64 {
        let mut n = self.n_floor();
        while self.total_len(n) == 0 {
            n += 1;
        }
        n
    }

    /// The member string for parameter `n` (letters only, no BOS/EOS).
    fn string_for_n(&self, n: u64) -> Result<Vec<Token>, LangError> {
        if n < self.min_n() {
            return Err(LangError::InvalidN {
                n,
                min: self.min_n(),
            });
        }
        let alphabet = self.alphabet();
        let mut out = Vec::with_capacity(self.total_len(n) as usize);
        for i in 1..=self.letters() {
            let count = self.block_len(i, n);
            for _ in 0..count {
                out.push(alphabet.letter(i));
            }
        }
        Ok(out)
    }

    /// Letter counts per block when `tokens` has valid nondecreasing
    /// block structure; `None` otherwise. The second value is the index
    /// of the last letter present (0 for the empty string).
    fn parse_blocks(&self, tokens: &[Token]) -> Option<(Vec<u64>, usize)> {
        let k = self.letters();
        let mut counts = vec![0u64; k + 1];
        let mut cur = 0usize;
        for &t in tokens {
            let idx = t as usize;
            if idx < 1 || idx > k || idx < cur {
                return None;
            }
            cur = idx;
            counts[idx] += 1;
        }
        Some((counts, cur))
    }

    fn is_member(&self, tokens: &[Token]) -> bool {
        let Some((counts, _)) = self.parse_blocks(tokens) else {
            return false;
        };
        if tokens.is_empty() {
            return false;
        }
        let n = counts[1];
        if n < self.n_floor() {
            return false;
        }
        (2..=self.letters()).all(|i| counts[i] == self.block_len(i, n))
    }

    /// Is `counts` (with last letter `j`) a prefix of some member?
    fn live_prefix(&self, counts: &[u64], j: usize) -> bool {
        if j <= 1 {
            // Only the first block has started; any larger n completes it.
            return true;
        }
        // A later block pins n to the first block's count.
        let n = counts[1];
        if n < self.n_floor() {
            return false;
        }
        for i in 2..j {
            if counts[i] != self.block_len(i, n) {
                return false;
            }
        }
        counts[j] <= self.block_len(j, n)
    }

    /// The generative oracle: every token that extends `prefix` to a
    /// prefix of some member, or [`AllowedNext::Dead`] when `prefix`
    /// itself is not one. With `with_eos`, EOS is additionally allowed
    /// whenever `prefix` is a complete member.
    fn allowed_next(&self, prefix: &[Token], with_eos: bool) -> AllowedNext {
        let Some((counts, j)) = self.parse_blocks(prefix) else {
            return AllowedNext::Dead;
        };
        if !self.live_prefix(&counts, j) {
            return AllowedNext::Dead;
        }
        let alphabet = self.alphabet();
        let mut set = BTreeSet::new();
        for t in j.max(1)..=self.letters() {
            let mut c = counts.clone();
            c[t] += 1;
            if self.live_prefix(&c, t) {
                set.insert(alphabet.letter(t));
            }
        }
        if with_eos && self.is_member(prefix) {
            set.insert(alphabet.eos());
        }
        AllowedNext::Next(set)
    }
}

/// Four-letter language with offsets `(m_b, m_c, m_d)` in `[-3, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatasetLanguageSpec {
    pub m_b: i8,
    pub m_c: i8,
    pub m_d: i8,
}

pub const DATASET_OFFSET_MIN: i8 = -3;
pub const DATASET_OFFSET_MAX: i8 = 2;

impl DatasetLanguageSpec {
    pub fn new(m_b: i8, m_c: i8, m_d: i8) -> Result<Self, LangError> {
        for (name, v) in [("m_b", m_b), ("m_c", m_c), ("m_d", m_d)] {
            if !(DATASET_OFFSET_MIN..=DATASET_OFFSET_MAX).contains(&v) {
                return Err(LangError::InvalidOffset {
                    detail: format!("{name} = {v} outside [-3, 2]"),
                });
            }
        }
        Ok(Self { m_b, m_c, m_d })
    }

    /// All 216 languages in canonical (m_b, m_c, m_d) order.
    pub fn grid() -> Vec<Self> {
        let mut out = Vec::with_capacity(216);
        for m_b in DATASET_OFFSET_MIN..=DATASET_OFFSET_MAX {
            for m_c in DATASET_OFFSET_MIN..=DATASET_OFFSET_MAX {
                for m_d in DATASET_OFFSET_MIN..=DATASET_OFFSET_MAX {
                    out.push(Self { m_b, m_c, m_d });
                }
            }
        }
        out
    }

    pub fn abs_sum(&self) -> u32 {
        self.m_b.unsigned_abs() as u32
            + self.m_c.unsigned_abs() as u32
            + self.m_d.unsigned_abs() as u32
    }

    pub fn offsets(&self) -> [i8; 3] {
        [self.m_b, self.m_c, self.m_d]
    }
}

impl fmt::Display for DatasetLanguageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L({},{},{})", self.m_b, self.m_c, self.m_d)
    }
}

impl LanguageSpec for DatasetLanguageSpec {
    fn letters(&self) -> usize {
        4
    }

    fn offset(&self, block: usize) -> i64 {
        match block {
            1 => 0,
            2 => self.m_b as i64,
            3 => self.m_c as i64,
            4 => self.m_d as i64,
            _ => panic!("block {block} out of range"),
        }
    }

    fn n_floor(&self) -> u64 {
        let m = 0.min(self.m_b).min(self.m_c).min(self.m_d) as i64;
        (-m) as u64
    }
}

/// `k`-letter language with offsets `m_2..m_k` in `[1, M]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeneralLanguageSpec {
    bound: u32,
    offsets: Vec<u32>,
}

impl GeneralLanguageSpec {
    pub fn new(bound: u32, offsets: Vec<u32>) -> Result<Self, LangError> {
        if bound < 2 {
            return Err(LangError::InvalidOffset {
                detail: format!("offset bound M = {bound} must be at least 2"),
            });
        }
        if offsets.len() < 2 {
            return Err(LangError::InvalidOffset {
                detail: format!("need k >= 3 letters, got k = {}", offsets.len() + 1),
            });
        }
        if let Some(bad) = offsets.iter().find(|&&m| m < 1 || m > bound) {
            return Err(LangError::InvalidOffset {
                detail: format!("offset {bad} outside [1, {bound}]"),
            });
        }
        Ok(Self { bound, offsets })
    }

    /// All `M^(k-1)` languages for `k` letters and bound `M`, in
    /// canonical lexicographic offset order.
    pub fn grid(k: usize, bound: u32) -> Vec<Self> {
        assert!(k >= 3, "general form needs k >= 3");
        let slots = k - 1;
        let total = (bound as usize).pow(slots as u32);
        let mut out = Vec::with_capacity(total);
        let mut offsets = vec![1u32; slots];
        loop {
            out.push(Self {
                bound,
                offsets: offsets.clone(),
            });
            // Odometer increment over [1, bound]^slots.
            let mut i = slots;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if offsets[i] < bound {
                    offsets[i] += 1;
                    for o in offsets[i + 1..].iter_mut() {
                        *o = 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn bound(&self) -> u32 {
        self.bound
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }
}

impl fmt::Display for GeneralLanguageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.offsets.iter().map(|m| m.to_string()).collect();
        write!(f, "L({})", parts.join(","))
    }
}

impl LanguageSpec for GeneralLanguageSpec {
    fn letters(&self) -> usize {
        self.offsets.len() + 1
    }

    fn offset(&self, block: usize) -> i64 {
        if block == 1 {
            0
        } else {
            self.offsets[block - 2] as i64
        }
    }

    fn n_floor(&self) -> u64 {
        1
    }
}
